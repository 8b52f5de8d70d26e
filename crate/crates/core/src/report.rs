//! Report rows and their CSV and text renderings.
//!
//! Floats are written with `{:e}` (shortest round-trip), so identical
//! values give identical bytes.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::LawCheck;
use crate::error::Result;
use crate::wiener::MCEstimate;

/// One checked quantity. `pass` is `value ≤ tolerance`; MC rows carry the
/// z-score as value and 3 as tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub suite: String,
    pub case: String,
    pub metric: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ReportRow {
    pub fn new(suite: &str, case: impl Into<String>, metric: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            suite: suite.to_string(),
            case: case.into(),
            metric: metric.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

/// Two MC estimates of one component (`re` or `im`) of one value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationRow {
    pub case: String,
    pub a: MCEstimate,
    pub b: MCEstimate,
    pub zscore: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub rotation: Vec<RotationRow>,
    pub laws: Vec<LawCheck>,
    /// `(case, message)` for cases that stopped on an error.
    pub errors: Vec<(String, String)>,
}

pub const Z_LIMIT: f64 = 3.0;

impl Report {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass) && self.errors.is_empty()
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
        self.rotation.extend(other.rotation);
        self.laws.extend(other.laws);
        self.errors.extend(other.errors);
    }

    pub fn push_error(&mut self, suite: &str, case: &str, err: impl std::fmt::Display) {
        self.rows.push(ReportRow::new(suite, case, "error", f64::NAN, 0.0));
        self.errors.push((case.to_string(), err.to_string()));
    }

    /// Records one MC comparison: a rotation row per component and one
    /// report row with the larger z-score.
    pub fn push_mc(&mut self, suite: &str, case: &str, metric: &str, a: [MCEstimate; 2], b: [MCEstimate; 2]) {
        let mut worst = 0.0f64;
        for (part, (ea, eb)) in ["re", "im"].iter().zip(a.iter().zip(&b)) {
            let z = ea.zscore(eb);
            worst = worst.max(z);
            self.rotation.push(RotationRow {
                case: format!("{case}/{metric}.{part}"),
                a: *ea,
                b: *eb,
                zscore: z,
                pass: z <= Z_LIMIT,
            });
        }
        self.rows.push(ReportRow::new(suite, case, metric, worst, Z_LIMIT));
    }

    pub fn push_laws(&mut self, suite: &str, case: &str, laws: Vec<LawCheck>) {
        for l in &laws {
            let mut row = ReportRow::new(
                suite,
                case,
                format!("{}#{}", l.law, l.sample_id),
                l.residual,
                l.tolerance,
            );
            row.pass = l.pass;
            self.rows.push(row);
        }
        self.laws.extend(laws);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["suite", "case", "metric", "value", "tolerance", "pass"])?;
        for r in &self.rows {
            w.write_record([
                r.suite.as_str(),
                &r.case,
                &r.metric,
                &fmt_f64(r.value),
                &fmt_f64(r.tolerance),
                if r.pass { "true" } else { "false" },
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_rotation_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "case",
            "estimate_a",
            "stderr_a",
            "estimate_b",
            "stderr_b",
            "zscore",
            "pass",
        ])?;
        for r in &self.rotation {
            w.write_record([
                r.case.as_str(),
                &fmt_f64(r.a.mean),
                &fmt_f64(r.a.stderr),
                &fmt_f64(r.b.mean),
                &fmt_f64(r.b.stderr),
                &fmt_f64(r.zscore),
                if r.pass { "true" } else { "false" },
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_algebra_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["law", "sample_id", "residual", "pass"])?;
        for l in &self.laws {
            w.write_record([
                l.law.as_str(),
                &l.sample_id.to_string(),
                &fmt_f64(l.residual),
                if l.pass { "true" } else { "false" },
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let mut suites: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !suites.contains(&r.suite.as_str()) {
                suites.push(&r.suite);
            }
        }
        for suite in suites {
            let rows = self.rows.iter().filter(|r| r.suite == suite);
            let (total, passed) = rows.fold((0, 0), |(t, p), r| (t + 1, p + r.pass as usize));
            let _ = writeln!(s, "{suite}: {passed}/{total} rows pass");
        }
        for r in self.failures() {
            let _ = writeln!(
                s,
                "FAIL {}/{} {}: {} > {}",
                r.suite,
                r.case,
                r.metric,
                fmt_f64(r.value),
                fmt_f64(r.tolerance)
            );
        }
        for (case, msg) in &self.errors {
            let _ = writeln!(s, "ERROR {case}: {msg}");
        }
        let _ = writeln!(s, "{}", if self.pass() { "PASS" } else { "FAIL" });
        s
    }

    /// `report.csv` and `summary.txt`, plus `rotation.csv` and `algebra.csv`
    /// when those have rows.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("report.csv"))?)?;
        if !self.rotation.is_empty() {
            self.write_rotation_csv(std::fs::File::create(dir.join("rotation.csv"))?)?;
        }
        if !self.laws.is_empty() {
            self.write_algebra_csv(std::fs::File::create(dir.join("algebra.csv"))?)?;
        }
        std::fs::write(dir.join("summary.txt"), self.summary())?;
        Ok(())
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_and_pass_rule() {
        let mut r = Report::default();
        r.rows
            .push(ReportRow::new("transform", "inv", "roundtrip", 1e-12, 1e-9));
        r.rows.push(ReportRow::new("transform", "inv", "nan", f64::NAN, 1e-9));
        assert!(!r.rows[1].pass);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "suite,case,metric,value,tolerance,pass\ntransform,inv,roundtrip,1e-12,1e-9,true\ntransform,inv,nan,NaN,1e-9,false\n"
        );
        assert!(!r.pass());
        assert!(r.summary().contains("FAIL transform/inv nan"));
    }

    #[test]
    fn empty_report_passes() {
        let r = Report::default();
        assert!(r.pass());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(buf, b"suite,case,metric,value,tolerance,pass\n");
    }

    #[test]
    fn mc_rows_use_the_worse_component() {
        let e = |mean, stderr| MCEstimate { mean, stderr, n: 100 };
        let mut r = Report::default();
        r.push_mc(
            "rotation",
            "c",
            "f0",
            [e(1.0, 0.1), e(0.0, 0.0)],
            [e(1.1, 0.1), e(0.0, 0.0)],
        );
        assert_eq!(r.rotation.len(), 2);
        assert_eq!(r.rotation[1].zscore, 0.0);
        assert!((r.rows[0].value - 0.1 / 0.1f64.hypot(0.1)).abs() < 1e-12);
        assert!(r.pass());
    }
}
