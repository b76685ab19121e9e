#![cfg(feature = "cli")]

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;
use std::process::Command;

use holoq::cli::{self, ExperimentConfig};
use holoq::gaugeholo::{HolonomyOptions, ParamLoop};
use holoq::tripod::gate_u1;
use serde_json::{json, Value};

fn config(v: Value) -> ExperimentConfig {
    ExperimentConfig::from_json(&v.to_string()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn holoq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_holoq"))
}

#[test]
fn u1_gate_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(json!({
        "kind": "tripod-gates",
        "system": { "preset": "tripod-u1", "alpha": 0.6, "delta": 1.0 },
        "options": { "theta0": FRAC_PI_2 },
    }));
    let report = cli::run(&cfg, Some(dir.path())).unwrap();
    assert!(report.passed);
    let direct = gate_u1(
        &ParamLoop::rectangle([0.0, 0.0], [FRAC_PI_2, TAU]),
        0.6,
        1.0,
        1.0,
        &HolonomyOptions::default(),
    )
    .unwrap();
    assert!((report.scalars["beta1"] + PI).abs() < 1e-9);
    assert_eq!(report.scalars["beta1"], direct.beta);
    assert!(report.scalars["discrepancy"] < 1e-6);

    let saved: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(saved["kind"], "tripod-gates");
    assert_eq!(saved["config"]["options"]["theta0"], json!(FRAC_PI_2));
    for check in saved["checks"].as_array().unwrap() {
        assert!(check["value"].is_number() && check["threshold"].is_number());
    }
    let (header, rows) = read_csv(&dir.path().join("gauge_field.csv"));
    assert_eq!(header[..3], ["lambda_0", "lambda_1", "mu"]);
    assert_eq!(header.len(), 3 + 8);
    assert!(!rows.is_empty() && rows.iter().all(|r| r.len() == header.len()));
}

#[test]
fn verify_lists_every_module() {
    let report = cli::run(&config(json!({ "kind": "verify" })), None).unwrap();
    assert!(report.passed);
    for m in cli::verify::MODULES {
        assert!(
            report.checks.iter().any(|c| c.name.starts_with(&format!("{m}."))),
            "{m}"
        );
    }
    let only = cli::run(&config(json!({ "kind": "verify", "filter": "tripod" })), None).unwrap();
    assert!(only.checks.iter().all(|c| c.name.starts_with("tripod.")));
}

#[test]
fn doubling_duration_reduces_gate_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(json!({
        "kind": "evolve",
        "system": { "preset": "tripod-u1", "alpha": 0.5, "delta": 1.0 },
        "options": { "theta0": 1.2, "durations": [40, 80, 160], "n_steps": 40000 },
        "output": { "max_trajectory_rows": 500 },
    }));
    let report = cli::run(&cfg, Some(dir.path())).unwrap();
    assert!(report.passed, "{:?}", report.checks);
    let errors: Vec<f64> = report.table.iter().map(|r| r["gate_error"].as_f64().unwrap()).collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    let (header, rows) = read_csv(&dir.path().join("trajectory.csv"));
    assert_eq!(header.first().map(String::as_str), Some("t"));
    assert_eq!(header.last().map(String::as_str), Some("eta_norm"));
    assert_eq!(header.len(), 1 + 2 * 4 + 1);
    assert!(rows.len() <= 501);
    assert_eq!(column(&header, &rows, "t").last().copied(), Some(160.0));
}

#[test]
fn theta_sweep_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(json!({
        "kind": "sweep",
        "system": { "preset": "tripod-u1", "alpha": 0.6, "delta": 1.0 },
        "options": { "n_steps": 1000 },
        "sweep": {
            "experiment": "tripod-gates",
            "axes": [{ "name": "theta0", "start": 0.2, "stop": 2.9, "count": 8 }],
        },
    }));
    let report = cli::run(&cfg, Some(dir.path())).unwrap();
    assert!(report.passed);
    let (header, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 8);
    let theta = column(&header, &rows, "theta0");
    let beta = column(&header, &rows, "beta1");
    // Rows follow grid order.
    assert!(theta.windows(2).all(|w| w[1] > w[0]));
    for (t, b) in theta.iter().zip(&beta) {
        assert!((b + TAU * (t / 2.0).sin().powi(2)).abs() < 1e-6);
    }
}

#[test]
fn alpha_sweep_keeps_pseudo_hermiticity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(json!({
        "kind": "sweep",
        "system": { "preset": "tripod-u2", "alpha": 0.5, "delta": 1.0 },
        "options": { "point": [0.9, 2.1] },
        "sweep": {
            "experiment": "decompose",
            "axes": [{ "name": "alpha", "values": [0.1, 0.3, 0.5, 0.7, 0.9] }],
        },
    }));
    cli::run(&cfg, Some(dir.path())).unwrap();
    let (header, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 5);
    assert!(column(&header, &rows, "pseudo_hermiticity_residual")
        .iter()
        .all(|r| *r < 1e-10));
}

#[test]
fn empty_grid_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(json!({
        "kind": "sweep",
        "system": { "preset": "tripod-u1", "alpha": 0.6, "delta": 1.0 },
        "sweep": {
            "experiment": "tripod-gates",
            "axes": [{ "name": "theta0", "start": 0.2, "stop": 2.9, "count": 0 }],
        },
    }));
    cli::run(&cfg, Some(dir.path())).unwrap();
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text, "theta0,status,error\n");
}

#[test]
fn failing_sweep_point_does_not_abort() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(json!({
        "kind": "sweep",
        "system": { "preset": "tripod-u1", "alpha": 0.6, "delta": 1.0 },
        "options": { "n_steps": 400 },
        "sweep": { "experiment": "tripod-gates", "axes": [{ "name": "theta0", "values": [1.0, 4.0, 2.0] }] },
    }));
    let report = cli::run(&cfg, Some(dir.path())).unwrap();
    assert!(!report.passed);
    let (header, rows) = read_csv(&dir.path().join("sweep.csv"));
    let status = header.iter().position(|h| h == "status").unwrap();
    let got: Vec<&str> = rows.iter().map(|r| r[status].as_str()).collect();
    assert_eq!(got, ["pass", "error", "pass"]);
    assert!(rows[1].last().unwrap().contains("theta0"));
}

#[test]
fn identical_configs_give_identical_scalars() {
    let cfg = config(json!({
        "kind": "holonomy",
        "system": { "preset": "random", "spectrum": [0.0, 0.0, 1.0, -1.5], "seed": 3 },
        "loop": { "rectangle": [[0.0, 0.0], [0.2, 0.3]] },
        "options": { "n_steps": 300 },
        "output": { "gauge_field": false },
    }));
    let a = cli::run(&cfg, None).unwrap();
    let b = cli::run(&cfg, None).unwrap();
    assert_eq!(a.scalars, b.scalars);
    assert!(a.scalars.values().all(|v| v.is_finite()));
}

#[test]
fn control_run_shows_drift() {
    let cfg = config(json!({
        "kind": "evolve",
        "system": { "preset": "breathing-metric", "dim": 3, "strength": 0.4, "seed": 1 },
        "options": { "durations": [3.0], "n_steps": 2000, "generator": "hamiltonian_only" },
    }));
    let report = cli::run(&cfg, None).unwrap();
    assert!(report.passed);
    assert!(report.scalars["drift"] > 1e-2);
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("out");

    let ok = write(
        d,
        "ok.json",
        r#"{"kind": "tripod-gates", "system": {"preset": "tripod-u2", "alpha": 0.6, "delta": 1.0}, "options": {"theta0": 1.0, "n_steps": 500}}"#,
    );
    let run = holoq()
        .arg("run")
        .arg(&ok)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0));
    assert!(run.stdout.is_empty());
    assert!(out.join("report.json").exists() && out.join("gauge_field.csv").exists());

    let strict = write(
        d,
        "strict.json",
        r#"{"kind": "tripod-gates", "system": {"preset": "tripod-u2", "alpha": 0.6, "delta": 1.0}, "options": {"theta0": 1.0, "n_steps": 500, "tolerances": {"discrepancy": 1e-30}}}"#,
    );
    let run = holoq().arg("run").arg(&strict).arg("--out").arg(&out).output().unwrap();
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stdout).contains("FAIL discrepancy"));

    for bad in [
        "{not json",
        r#"{"kind": "decompose", "system": {"preset": "nonexistent"}}"#,
        r#"{"kind": "tripod-gates", "system": {"preset": "tripod-u1", "alpha": 0.6, "delta": 1.0}, "options": {"tolerances": {"residual": -1}}}"#,
        r#"{"kind": "tripod-gates", "system": {"preset": "tripod-u1", "alpha": 1.5, "delta": 1.0}, "options": {"theta0": 1.0}}"#,
    ] {
        let cfg = write(d, "bad.json", bad);
        let run = holoq().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap();
        assert_eq!(run.status.code(), Some(2), "{bad}");
        assert!(!run.stderr.is_empty());
    }

    let jordan = write(
        d,
        "jordan.json",
        r#"{"kind": "decompose", "system": {"preset": "inline", "matrix": {"rows": 2, "cols": 2, "data": [[1,0],[1,0],[0,0],[1,0]]}}}"#,
    );
    let run = holoq().arg("run").arg(&jordan).arg("--out").arg(&out).output().unwrap();
    assert_eq!(run.status.code(), Some(3));

    let missing = holoq().arg("run").arg(d.join("absent.json")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn binary_verify() {
    let run = holoq().args(["verify", "--filter", "bundles"]).output().unwrap();
    assert_eq!(run.status.code(), Some(0));
    let text = String::from_utf8_lossy(&run.stdout);
    assert!(text.lines().count() >= 3 && text.lines().all(|l| l.starts_with("PASS bundles.")));
    let bad = holoq().args(["verify", "--filter", "nope"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
