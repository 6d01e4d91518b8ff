use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn slicelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slicelab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_owned()
}

/// Verify settings small enough for a test run.
const QUICK_VERIFY: &str = r#"{
    "ks_samples": 2000, "ks_threshold": 0.05,
    "ks_targets": [{"tag": "exponential", "rate": 1.0}], "ks_dims": [3],
    "mc_steps": 20000, "kernel_probes": 3,
    "adjointness_points": 1024,
    "duality_dims": [2], "duality_grid_size": 128"#;

fn strip_wall_time(csv_text: &str) -> Vec<String> {
    let mut lines = csv_text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "wall_time_ms").unwrap();
    lines
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(col);
            f.join(",")
        })
        .collect()
}

#[test]
fn iat_sweep_smoke_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"dims": [1, 3], "n_it": 1000, "n_rep": 2}"#,
    );
    let out = dir.path().join("iat.csv");
    let o = slicelab(&[
        "iat-sweep",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "d,sampler,rep,seed,iat,truncation_lag,wall_time_ms,mean,sd"
    );
    // d=1: USS only; d=3: USS and PSS; each cell has 2 reps + a summary row.
    assert_eq!(lines.len(), 1 + 3 * 3);
    assert!(lines.iter().any(|l| l.starts_with("3,PSS,-1,")));
    for l in lines.iter().skip(1).filter(|l| !l.contains(",-1,")) {
        let iat: f64 = l.split(',').nth(4).unwrap().parse().unwrap();
        assert!(iat >= 0.0 && iat.is_finite());
    }
    let meta: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("iat.csv.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["burn_in"], 0);
    assert_eq!(meta["config"]["n_it"], 1000);
}

#[test]
fn iat_sweep_is_deterministic_under_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"dims": [2, 5], "n_it": 2000, "n_rep": 3}"#,
    );
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = slicelab(&[
            "iat-sweep",
            "--config",
            &cfg,
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        strip_wall_time(&fs::read_to_string(out).unwrap())
    };
    let a = run("42", "a.csv");
    assert_eq!(a, run("42", "b.csv"));
    assert_ne!(a, run("43", "c.csv"));
}

#[test]
fn gap_table_json() {
    let o = slicelab(&["gap-table", "--grid-size", "128"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 7);
    for r in rows {
        let gap = r["gap"].as_f64().unwrap();
        assert!(gap > 0.4 && gap <= 1.0, "{r}");
        assert!(r["lambda_min"].as_f64().unwrap() >= -1.0);
        assert!(r["refinement_delta"].as_f64().is_some());
        assert_eq!(r["alpha"], "PSS");
    }
}

#[test]
fn check_lambda_uss_needs_k_equal_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"alpha": "uss", "dims": [3], "lambda_k": [1, 3]}"#,
    );
    let o = slicelab(&["check-lambda", "--config", &cfg]);
    assert!(o.status.success());
    let rows: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows[0]["k"], 1);
    assert_eq!(rows[0]["passed"], false);
    assert!(!rows[0]["violations"].as_array().unwrap().is_empty());
    assert_eq!(rows[1]["passed"], true);
}

#[test]
fn zero_k_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"lambda_k": [0]}"#);
    let o = slicelab(&["check-lambda", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda_k"));
    assert!(o.stdout.is_empty());
}

#[test]
fn malformed_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"n_it": "many"}"#);
    assert_eq!(
        slicelab(&["iat-sweep", "--config", &cfg]).status.code(),
        Some(2)
    );
    let missing = dir.path().join("absent.json");
    assert_eq!(
        slicelab(&["gap-table", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn verify_quick_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let json = format!(r#"{{"grid": {{"size": 256}}, "verify": {QUICK_VERIFY}}}}}"#);
    let cfg = write_config(dir.path(), "c.json", &json);
    let report = dir.path().join("verify.json");
    let o = slicelab(&[
        "verify",
        "--config",
        &cfg,
        "--out",
        report.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
    let results: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(results.as_array().unwrap().len(), stdout.lines().count());
}

#[test]
fn verify_rejects_corrupted_level_set() {
    let dir = tempfile::tempdir().unwrap();
    let json =
        format!(r#"{{"grid": {{"size": 256}}, "verify": {QUICK_VERIFY}, "corrupt_ell": true}}}}"#);
    let cfg = write_config(dir.path(), "c.json", &json);
    let o = slicelab(&["verify", "--config", &cfg]);
    assert!(!o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    let line = stdout
        .lines()
        .find(|l| l.contains("kernel_invariants"))
        .unwrap();
    assert!(line.starts_with("FAIL"), "{line}");
}

#[test]
fn verify_skips_underpowered_ks() {
    let dir = tempfile::tempdir().unwrap();
    let json = format!(
        r#"{{"grid": {{"size": 256}}, "verify": {}, "ks_samples": 100, "ks_threshold": 0.02}}}}"#,
        QUICK_VERIFY.replace(r#""ks_samples": 2000, "ks_threshold": 0.05,"#, "")
    );
    let cfg = write_config(dir.path(), "c.json", &json);
    let o = slicelab(&["verify", "--config", &cfg]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    let ks: Vec<&str> = stdout.lines().filter(|l| l.contains("ks_")).collect();
    assert_eq!(ks.len(), 4);
    assert!(ks
        .iter()
        .all(|l| l.starts_with("SKIP") && l.contains("underpowered")));
}
