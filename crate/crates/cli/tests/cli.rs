//! End-to-end runs of the `hessian-lab` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hessian-lab"))
        .args(args)
        .output()
        .unwrap()
}

fn run_in(dir: &Path, sub: &str, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    lab(&args)
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn check<'a>(s: &'a Value, name: &str) -> &'a Value {
    s["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn solve_reports_the_error_against_the_exact_solution() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), "solve", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(tmp.path());
    assert_eq!(s["pass"], true);
    let c = check(&s, "sup_error_vs_exact");
    assert!(c["value"].as_f64().unwrap() <= c["tolerance"].as_f64().unwrap());
    for f in ["solution.grid", "residual.csv", "run_info.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let grid = std::fs::read_to_string(tmp.path().join("solution.grid")).unwrap();
    assert!(grid.starts_with("n=2 h=0.125"));
}

#[test]
fn every_check_carries_its_tolerance() {
    let tmp = TempDir::new().unwrap();
    assert!(run_in(tmp.path(), "verify", &[]).status.success());
    let s = summary(tmp.path());
    let checks = s["checks"].as_array().unwrap();
    assert!(checks.len() >= 8);
    for c in checks {
        assert!(c["tolerance"].is_number() && c["bound"].is_number(), "{c}");
        assert_eq!(c["pass"], true, "{c}");
    }
}

#[test]
fn singular_density_preset_meets_the_prediction() {
    let tmp = TempDir::new().unwrap();
    assert!(run_in(tmp.path(), "holder", &["--preset", "mcor_b"]).status.success());
    let s = summary(tmp.path());
    let c = check(&s, "fitted_alpha_vs_singular_prediction");
    assert!((c["bound"].as_f64().unwrap() - 0.225).abs() < 1e-12);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("holder.json")).unwrap()).unwrap();
    assert_eq!(report["fitted_alpha"], c["value"]);
    let csv = std::fs::read_to_string(tmp.path().join("holder.csv")).unwrap();
    assert!(csv.starts_with("delta,sup_maxdiff,sup_avgdiff\n"));
}

#[test]
fn barrier_preset_certifies_the_kink() {
    let tmp = TempDir::new().unwrap();
    assert!(run_in(tmp.path(), "barriers", &["--preset", "hr"]).status.success());
    assert_eq!(summary(tmp.path())["pass"], true);
    assert!(tmp.path().join("envelope.grid").exists());
}

#[test]
fn capacity_writes_both_tables() {
    let tmp = TempDir::new().unwrap();
    assert!(run_in(tmp.path(), "capacity", &[]).status.success());
    for f in ["capacity.csv", "capacity_radial.csv"] {
        let text = std::fs::read_to_string(tmp.path().join(f)).unwrap();
        assert!(text.starts_with("r,volume,capacity\n"));
        assert_eq!(text.lines().count(), 5);
    }
}

#[test]
fn reruns_with_the_same_seed_are_byte_identical() {
    let (a, b, c) = (
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
    );
    for (dir, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        assert!(
            run_in(dir.path(), "stability", &["--preset", "se_th_5", "--seed", seed])
                .status
                .success()
        );
    }
    let read = |d: &TempDir| std::fs::read(d.path().join("summary.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let csv = std::fs::read_to_string(a.path().join("stability.csv")).unwrap();
    assert!(csv.starts_with("epsilon,sup_diff,norm_r,ratio\n"));
}

#[test]
fn invalid_configs_exit_with_status_2() {
    let tmp = TempDir::new().unwrap();
    let missing = write_config(tmp.path(), r#"{"experiment": "solve"}"#);
    let out = run_in(tmp.path(), "solve", &["--config", &missing]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "validation");

    let out = run_in(tmp.path(), "holder", &["--config", &missing]);
    assert_eq!(out.status.code(), Some(2));

    let bad_m = write_config(
        tmp.path(),
        r#"{"experiment": "solve", "domain": {"kind": "ball", "n": 2, "radius": 1.0}, "h": 0.25, "m": 3,
            "density": {"kind": "constant", "value": 1.0}, "boundary": {"kind": "constant", "value": 0.0}}"#,
    );
    assert_eq!(
        run_in(tmp.path(), "solve", &["--config", &bad_m]).status.code(),
        Some(2)
    );
    assert_eq!(lab(&["solve", "--preset", "nope"]).status.code(), Some(2));
}

#[test]
fn failed_checks_exit_with_status_1_and_are_named() {
    let tmp = TempDir::new().unwrap();
    // V/cap^τ over radii 0.02 and 0.6 spreads far beyond the factor 10
    let wide = write_config(
        tmp.path(),
        r#"{"experiment": "capacity", "domain": {"kind": "ball", "n": 2, "radius": 1.0}, "h": 0.125, "m": 2,
            "density": {"kind": "constant", "value": 1.0}, "boundary": {"kind": "constant", "value": 0.0},
            "radii": [0.02, 0.6]}"#,
    );
    let out = run_in(tmp.path(), "capacity", &["--config", &wide]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("radial_volume_capacity_spread"));
    assert_eq!(summary(tmp.path())["pass"], false);
}
