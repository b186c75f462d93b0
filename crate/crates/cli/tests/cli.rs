//! End-to-end tests of the installed binary: exit codes, JSON output,
//! and byte-determinism of report files.

use std::path::Path;
use std::process::{Command, Output};

fn mwlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mwlab"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn verify_single_suite_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"depth": 2, "instances": 2}"#);
    let out = mwlab()
        .args(["--config", cfg.to_str().unwrap(), "verify", "averaging"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("[PASS] averaging"));
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"frobnicate": 1}"#);
    let out = mwlab()
        .args(["--config", cfg.to_str().unwrap(), "verify", "averaging"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("frobnicate"));
}

#[test]
fn out_of_range_depth_exits_two() {
    let out = mwlab()
        .args(["--depth", "9", "verify", "averaging"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("depth"));
}

#[test]
fn unknown_suite_exits_two() {
    let out = mwlab().args(["verify", "frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("frobnicate"));
}

#[test]
fn report_files_are_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"suite": "averaging", "depth": 2, "instances": 2}"#,
    );
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out_dir in [&out1, &out2] {
        let out = mwlab()
            .args([
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
                "report",
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    }
    let csv1 = std::fs::read(out1.join("averaging.csv")).unwrap();
    let csv2 = std::fs::read(out2.join("averaging.csv")).unwrap();
    assert_eq!(csv1, csv2);
    let json1 = std::fs::read(out1.join("averaging.json")).unwrap();
    let json2 = std::fs::read(out2.join("averaging.json")).unwrap();
    assert_eq!(json1, json2);

    let text = String::from_utf8(csv1).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "instance,operator_norm,reducing_product,relative_gap,witness_hash"
    );
    assert_eq!(lines.count(), 2);
    assert!(!text.contains('\r'));
}

#[test]
fn seed_flag_changes_report_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"suite": "averaging", "depth": 2, "instances": 2}"#,
    );
    let mut bodies = Vec::new();
    for seed in ["1", "2"] {
        let out_dir = dir.path().join(format!("seed{seed}"));
        let out = mwlab()
            .args([
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                seed,
                "--out",
                out_dir.to_str().unwrap(),
                "report",
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        bodies.push(std::fs::read(out_dir.join("averaging.csv")).unwrap());
    }
    assert_ne!(bodies[0], bodies[1]);
}

#[test]
fn ap_prints_json_with_unit_lower_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"depth": 2}"#);
    let out = mwlab()
        .args(["--config", cfg.to_str().unwrap(), "ap"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(parsed["ap_characteristic"].as_f64().unwrap() >= 1.0);
    assert_eq!(parsed["p"].as_f64().unwrap(), 2.0);
}

#[test]
fn commutator_reports_exact_mode_at_p2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"depth": 2}"#);
    let out = mwlab()
        .args(["--config", cfg.to_str().unwrap(), "commutator"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(parsed["value"].as_f64().unwrap() > 0.0);
    assert_eq!(parsed["mode"].as_str().unwrap(), "ExactP2");
    assert!(!parsed["witness_hash"].as_str().unwrap().is_empty());
}

#[test]
fn bmo_reports_all_five_quantities() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"depth": 2}"#);
    let out = mwlab()
        .args(["--config", cfg.to_str().unwrap(), "bmo"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in [
        "cube_average",
        "pointwise_weight",
        "adjoint_form",
        "tilde_primal",
        "tilde_dual",
    ] {
        assert!(parsed[key]["value"].as_f64().unwrap() > 0.0, "missing {key}");
        assert!(!parsed[key]["argmax"].as_str().unwrap().is_empty());
    }
}

#[test]
fn thread_cap_env_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"depth": 2, "instances": 2}"#);
    let out = mwlab()
        .env("MWLAB_THREADS", "1")
        .args(["--config", cfg.to_str().unwrap(), "verify", "averaging"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
}

#[test]
fn opnorm_honors_operator_choice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"depth": 2, "dim": 2, "operator": {"riesz": {"axis": 2}}}"#,
    );
    let out = mwlab()
        .args(["--config", cfg.to_str().unwrap(), "opnorm"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(parsed["operator"].as_str().unwrap().contains("Riesz"));
    assert!(parsed["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn hilbert_on_two_dimensions_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"depth": 2, "dim": 2, "operator": "hilbert"}"#,
    );
    let out = mwlab()
        .args(["--config", cfg.to_str().unwrap(), "opnorm"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
