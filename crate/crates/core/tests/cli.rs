use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multisample")).args(args).output().unwrap()
}

fn assert_fails(out: &Output, needle: &str) {
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains(needle), "{err}");
}

#[test]
fn gap_prints_report() {
    let out = cli(&["gap", "--phi1", "0.4,0.3,0.3", "--phi2", "0.5,0.1,0.4"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["gap"].as_f64().unwrap() - 1.0 / 63.0).abs() < 1e-12);
    assert_eq!(report["witness_subset"], serde_json::json!([0, 2]));
}

#[test]
fn gap_rejects_mismatched_lengths() {
    assert_fails(&cli(&["gap", "--phi1", "0.5,0.5", "--phi2", "0.2,0.3,0.5"]), "");
}

#[test]
fn cluster_reports_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = dir.path().join("out.csv");
    let m = missing.to_str().unwrap();
    assert_fails(&cli(&["cluster", "--s1", m, "--s2", m, "--out", out.to_str().unwrap()]), "");
    assert!(!out.exists());
}

#[test]
fn tree_output_needs_dsc() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.csv");
    std::fs::write(&s, "0\n1\n2\n3\n").unwrap();
    let s = s.to_str().unwrap();
    let out = dir.path().join("out.csv");
    let tree = dir.path().join("tree.json");
    let res = cli(&[
        "cluster", "--s1", s, "--s2", s, "--algorithm", "kmeans", "--k", "2",
        "--out", out.to_str().unwrap(), "--tree", tree.to_str().unwrap(),
    ]);
    assert_fails(&res, "--tree requires --algorithm dsc");
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "num_trails = 3\n").unwrap();
    let res = cli(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_fails(&res, "num_trails");
}
