use std::process::Command;

use ruinwalk::presets::preset;
use ruinwalk::spec::{Check, Statistic};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ruinwalk"))
}

#[test]
fn presets_command_lists_the_catalog() {
    let out = bin().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 14);
    assert!(text.contains("ex63-fluid") && text.contains("fail"));

    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["presets", "--json", "--write"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let all: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(all.len(), 14);
    assert!(dir.path().join("thm12-pareto.json").exists());
}

#[test]
fn bound_command_reports_feasibility() {
    let out = bin()
        .args([
            "bound", "--alpha", "3", "--beta", "2", "--expect", "feasible",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains(": feasible"));
    let out = bin()
        .args(["bound", "--alpha", "2", "--beta", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("infeasible"));
    let out = bin()
        .args([
            "bound", "--alpha", "2", "--beta", "3", "--expect", "feasible",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tails_command_prints_one_line_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let dist = dir.path().join("d.json");
    std::fs::write(
        &dist,
        r#"{"kind": "pareto", "params": {"alpha": 2.5, "sigma": 1.0}}"#,
    )
    .unwrap();
    let out = bin()
        .arg("tails")
        .arg(&dist)
        .args(["--x", "0", "1", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let rows: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 3);
    // (1 + x)^-2.5 at x = 3
    assert!((rows[2]["tail"].as_f64().unwrap() - 4f64.powf(-2.5)).abs() < 1e-15);
    assert_eq!(rows[2]["scale"].as_f64(), Some(3.0));
}

#[test]
fn run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "thm72-bound", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("thm72-bound/summary.json").exists());

    // a passing check that the spec claims should fail
    let mut s = preset("thm72-bound").unwrap();
    s.expect = ruinwalk::Verdict::Fail;
    let path = dir.path().join("wrong.json");
    std::fs::write(&path, s.to_json().unwrap()).unwrap();
    let out = bin()
        .arg("run")
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let mut s = preset("thm12-pareto").unwrap();
    s.x_grid.clear();
    s.check = Check::TauLimit {
        statistic: Statistic::Tau,
        ks_threshold: 0.1,
        conditions: false,
        cross_check: None,
    };
    std::fs::write(&path, s.to_json().unwrap()).unwrap();
    let out = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("x_grid"));

    let out = bin().args(["run", "/no/such/spec.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_overrides_seed_and_keeps_it_in_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "run",
            "ex73-construction",
            "--seed",
            "5",
            "--workers",
            "2",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let s: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("ex73-construction/summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(s["seed"], 5);
    assert!(s.get("workers").is_none());
}
