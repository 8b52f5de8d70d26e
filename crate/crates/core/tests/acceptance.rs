//! One pass/fail line per acceptance criterion, from two runs of the
//! bundled configuration.

use std::path::Path;
use std::time::Instant;

use gfft_core::config::{RunConfig, DEFAULT_CONFIG};
use gfft_core::gfft::{q_compose, QElem};
use gfft_core::report::{Report, ReportRow};
use gfft_core::suites::run_config;

fn rows<'a>(report: &'a Report, suite: &str, cases: &[&str]) -> Vec<&'a ReportRow> {
    report
        .rows
        .iter()
        .filter(|r| {
            r.suite == suite
                && cases
                    .iter()
                    .any(|c| r.case == *c || (c.ends_with('_') && r.case.starts_with(c)))
        })
        .collect()
}

fn csv_bytes(report: &Report) -> Vec<u8> {
    let mut out = Vec::new();
    report.write_csv(&mut out).unwrap();
    report.write_rotation_csv(&mut out).unwrap();
    report.write_algebra_csv(&mut out).unwrap();
    out
}

fn main() {
    let cfg = RunConfig::from_json(DEFAULT_CONFIG).expect("bundled config parses");
    let base = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let start = Instant::now();
    let report = run_config(&cfg, &base).expect("bundled config runs");
    let first = start.elapsed();
    let again = run_config(&cfg, &base).expect("bundled config runs");
    println!(
        "default suite: {} rows, {:.1}s per run",
        report.rows.len(),
        first.as_secs_f64()
    );
    for (case, msg) in &report.errors {
        println!("  error in {case}: {msg}");
    }

    let two = QElem::from_q(2.0).unwrap();
    let q22 = q_compose(two, two).q() == Some(1.0);
    let cancel = q_compose(two, QElem::from_q(-2.0).unwrap()).is_identity();

    let criteria: Vec<(&str, Vec<&ReportRow>, usize, bool)> = vec![
        (
            "rotation, two paths against one",
            rows(&report, "rotation", &["rotation_"]),
            24,
            true,
        ),
        (
            "sequence rotation, three estimators",
            rows(&report, "rotation", &["sequence_"]),
            36,
            true,
        ),
        (
            "kernel closed form against damped quadrature",
            rows(&report, "transform", &["kernel_oracle"]),
            20,
            true,
        ),
        ("inverse roundtrip", rows(&report, "transform", &["inverse"]), 50, true),
        (
            "composition, pairs, sequences and wedges",
            rows(&report, "transform", &["compose"]),
            25,
            true,
        ),
        (
            "Plancherel, closed form and indicator quadrature",
            rows(&report, "transform", &["plancherel", "plancherel_indicator"]),
            22,
            true,
        ),
        (
            "Monte Carlo against closed-form continuation",
            rows(&report, "rotation", &["continuation_"]),
            18,
            true,
        ),
        ("q-group laws", rows(&report, "algebra", &["q_group"]), 8, q22 && cancel),
        (
            "monoid, quotient and Xi laws",
            rows(&report, "algebra", &["monoid", "classes"]),
            210,
            true,
        ),
        (
            "free reduction and word evaluation",
            rows(&report, "algebra", &["free_reduction", "word_eval", "word_example"]),
            46,
            true,
        ),
    ];

    let mut all = true;
    for (i, (name, rs, expected, extra)) in criteria.iter().enumerate() {
        let failed: Vec<&&ReportRow> = rs.iter().filter(|r| !r.pass).collect();
        let ok = *extra && rs.len() == *expected && failed.is_empty();
        all &= ok;
        let worst = rs
            .iter()
            .map(|r| {
                if r.value.is_nan() {
                    f64::INFINITY
                } else {
                    r.value / r.tolerance
                }
            })
            .fold(0.0f64, f64::max);
        println!(
            "criterion {:>2} {}: {} ({} rows, expected {}, worst value/tolerance {:.3e})",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            name,
            rs.len(),
            expected,
            worst
        );
        for r in failed.iter().take(5) {
            println!(
                "    failing {} {} = {:e} (tolerance {:e})",
                r.case, r.metric, r.value, r.tolerance
            );
        }
    }
    let same = csv_bytes(&report) == csv_bytes(&again);
    all &= same;
    println!(
        "criterion 11 {}: two runs with one seed give byte-identical reports",
        if same { "PASS" } else { "FAIL" }
    );

    if !all {
        std::process::exit(1);
    }
}
