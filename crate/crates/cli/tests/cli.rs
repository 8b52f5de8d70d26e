use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gfft(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gfft"));
    cmd.args(args).env_remove("GFFT_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

const FUNCTIONAL: &str = r#"{"family": [{"cosine_normalized": 1}, {"cosine_normalized": 2}],
    "f": {"pgp": {"factors": [{"poly": [[1, 0], [0.5, -0.2]], "a": [1.1, 0.3], "b": [0.1, 0]},
                              {"poly": [[0.4, 0.1]], "a": [0.8, -0.2]}]}}}"#;

fn mixed_config() -> String {
    format!(
        r#"{{"T": 1, "N": 128, "n": 5000, "seed": 11,
        "rotation": [{{"kind": "pair", "id": "rot", "functionals": [{FUNCTIONAL}],
                       "h1": {{"constant": 0.5}}, "h2": {{"cosine": 3}}}}],
        "transform": [
        {{"kind": "inverse", "id": "inv", "random": 5, "tol": 1e-9}},
        {{"kind": "compose", "id": "comp", "pairs": 3, "sequences": 2, "wedges": 2, "seq_len": 3, "tol": 1e-8}},
        {{"kind": "plancherel", "id": "planch", "random": 3, "tol": 1e-8}}]}}"#
    )
}

#[test]
fn empty_case_list_passes_with_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"T": 1, "N": 16, "n": 10, "seed": 1}"#);
    let out = dir.path().join("out");
    let o = gfft(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&out, "report.csv"), "suite,case,metric,value,tolerance,pass\n");
    assert!(read(&out, "summary.txt").contains("PASS"));
}

#[test]
fn reports_are_reproducible_and_seed_precedence_holds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &mixed_config());
    let run = |name: &str, extra: &[&str], env: &[(&str, &str)]| {
        let out = dir.path().join(name);
        let mut args = vec!["run", "--config", &cfg, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = gfft(&args, env);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
        read(&out, "report.csv")
    };
    let a = run("a", &["--parallel", "1"], &[]);
    assert_eq!(a, run("b", &["--parallel", "3"], &[]));
    assert_eq!(a.lines().count(), 1 + 1 + 5 + 7 + 3);
    assert!(a.contains("rotation,rot,f0:two_vs_one,"));
    let seeded = run("c", &["--seed", "99"], &[]);
    assert_ne!(a, seeded);
    assert_eq!(seeded, run("d", &[], &[("GFFT_SEED", "99")]));
    assert_eq!(seeded, run("e", &["--seed", "99"], &[("GFFT_SEED", "5")]));
}

#[test]
fn invalid_configs_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"T": 1, "N": 16, "n": 10, "seed": 1, "colour": 3}"#,
    );
    assert_eq!(gfft(&["run", "--config", &bad], &[]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(
        gfft(&["run", "--config", missing.to_str().unwrap()], &[]).status.code(),
        Some(2)
    );
    let ok = write(dir.path(), "ok.json", r#"{"T": 1, "N": 16, "n": 10, "seed": 1}"#);
    assert_eq!(
        gfft(&["run", "--config", &ok, "--parallel", "0"], &[]).status.code(),
        Some(2)
    );
    assert_eq!(
        gfft(&["run", "--config", &ok], &[("GFFT_SEED", "x")]).status.code(),
        Some(2)
    );
    assert_eq!(
        gfft(&["run", "--config", &ok, "--suite", "nope"], &[]).status.code(),
        Some(2)
    );
}

#[test]
fn failing_rows_exit_with_status_one() {
    let dir = tempfile::tempdir().unwrap();
    // 𝒜h is orthogonal but not orthonormal for h ≡ 2
    let cfg = format!(
        r#"{{"T": 1, "N": 128, "n": 10, "seed": 1, "transform": [
            {{"kind": "plancherel", "id": "fat", "tol": 1e-8,
              "cases": [{{"functional": {FUNCTIONAL}, "q": 1.0, "h": {{"constant": 2}}}}]}}]}}"#
    );
    let cfg = write(dir.path(), "c.json", &cfg);
    let out = dir.path().join("out");
    let o = gfft(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(read(&out, "report.csv").contains("transform,fat,error,NaN,0e0,false"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ERROR fat"));
}

#[test]
fn verify_writes_suite_specific_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"T": 1, "N": 64, "n": 4000, "seed": 3,
            "rotation": [{{"kind": "pair", "id": "p", "functionals": [{FUNCTIONAL}],
                           "h1": {{"constant": 1}}, "h2": {{"cosine": 4}}}}],
            "algebra": [{{"kind": "free_reduction", "id": "fr", "words": 200, "max_len": 12, "generators": 3}},
                        {{"kind": "q_group", "id": "qg", "size": 50}}]}}"#
    );
    let cfg = write(dir.path(), "c.json", &cfg);
    let out = dir.path().join("rot");
    let o = gfft(
        &["verify", "rotation", "--config", &cfg, "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let rot = read(&out, "rotation.csv");
    assert!(rot.starts_with("case,estimate_a,stderr_a,estimate_b,stderr_b,zscore,pass\np/f0:two_vs_one.re,"));
    assert!(!out.join("algebra.csv").exists());

    let out = dir.path().join("alg");
    let o = gfft(
        &["verify", "algebra", "--config", &cfg, "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let alg = read(&out, "algebra.csv");
    assert!(alg.starts_with("law,sample_id,residual,pass\n"));
    assert!(alg.contains("reduce_confluent,0,0e0,true"));
    assert!(!read(&out, "report.csv").contains("rotation"));
}

#[test]
fn apply_closed_form_roundtrips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let apply = |name: &str, functional: &str, q: f64| -> String {
        let cfg = format!(
            r#"{{"T": 1, "N": 128, "functional": {functional}, "q": {q}, "h": {{"constant": -1}}, "mode": "closed"}}"#
        );
        let path = write(dir.path(), name, &cfg);
        let o = gfft(&["transform", "apply", "--config", &path], &[]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    let forward = apply("fwd.json", FUNCTIONAL, 1.5);
    let back: Value = serde_json::from_str(&apply("back.json", &forward, -1.5)).unwrap();
    let orig: Value = serde_json::from_str(FUNCTIONAL).unwrap();
    let fwd: Value = serde_json::from_str(&forward).unwrap();
    assert_ne!(fwd["f"], orig["f"]);
    let flat = |v: &Value| -> Vec<f64> {
        let mut out = Vec::new();
        for fac in v["f"]["pgp"]["factors"].as_array().unwrap() {
            for p in fac["poly"].as_array().unwrap() {
                out.extend(p.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()));
            }
            for key in ["a", "b"] {
                out.extend(
                    fac[key]
                        .as_array()
                        .map(|a| a.iter().map(|x| x.as_f64().unwrap()).collect())
                        .unwrap_or(vec![0.0, 0.0]),
                );
            }
        }
        out
    };
    let (x, y) = (flat(&orig), flat(&back));
    assert_eq!(x.len(), y.len());
    assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn apply_quadrature_writes_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"T": 1, "N": 64, "mode": "quadrature", "q": 1.0, "h": {"constant": 1},
        "functional": {"family": [{"cosine_normalized": 1}],
                       "f": {"blackbox": {"builtin": {"sampled": {"pgp": {"factors": [{"poly": [[1, 0]], "a": [1, 0]}]}}},
                                          "half_width": 8, "points": 128}}},
        "options": {"eps": [1e-3, 1e-5], "out_half_width": 6, "out_points": 64, "tol": 1e-3}}"#;
    let path = write(dir.path(), "q.json", cfg);
    let out = dir.path().join("samples.csv");
    let o = gfft(
        &["transform", "apply", "--config", &path, "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r1,re,im"));
    assert_eq!(lines.count(), 64);
}

#[test]
fn apply_monte_carlo_reports_estimate_and_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"T": 1, "N": 64, "functional": {FUNCTIONAL}, "h": {{"constant": 1}}, "mode": "mc", "lambda": 2, "n": 20000, "seed": 4}}"#
    );
    let path = write(dir.path(), "mc.json", &cfg);
    let o = gfft(&["transform", "apply", "--config", &path], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n"], 20000);
    assert!(v["zscore"].as_f64().unwrap() < 4.0, "{v}");
    assert_eq!(v["mean"].as_array().unwrap().len(), 2);
}

#[test]
fn apply_rejects_missing_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{"T": 1, "N": 64, "functional": {FUNCTIONAL}, "h": {{"constant": 1}}, "mode": "closed"}}"#);
    let path = write(dir.path(), "c.json", &cfg);
    assert_eq!(
        gfft(&["transform", "apply", "--config", &path], &[]).status.code(),
        Some(2)
    );
}
