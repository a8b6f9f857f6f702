//! End-to-end CLI contract: exit codes, report files, determinism.

use std::path::Path;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_releuler")
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(bin()).args(args).output().expect("spawn");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

#[test]
fn jet_verify_end_to_end_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    let args = |out: &Path| {
        vec![
            "jet-verify".to_string(),
            "--order".into(),
            "2".into(),
            "--count".into(),
            "20".into(),
            "--identities".into(),
            "WTe-h,CEQ".into(),
            "--seed".into(),
            "7".into(),
            "--output-dir".into(),
            out.to_string_lossy().into_owned(),
        ]
    };
    let (code, stdout) = run(&args(&out1).iter().map(|s| s.as_str()).collect::<Vec<_>>());
    assert_eq!(code, 0, "stdout: {stdout}");
    assert!(stdout.contains("WTe-h"));
    let (code, _) = run(&args(&out2).iter().map(|s| s.as_str()).collect::<Vec<_>>());
    assert_eq!(code, 0);
    let a = std::fs::read(out1.join("report.json")).unwrap();
    let b = std::fs::read(out2.join("report.json")).unwrap();
    assert_eq!(a, b, "same config + seed must give byte-identical reports");
    // the report carries the anchor string for each check
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("\"anchor\": \"CEQ\""));
}

#[test]
fn jet_verify_rejects_underresolved_identity() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(&[
        "jet-verify",
        "--order",
        "2",
        "--identities",
        "SDe",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn simulate_rest_state_flat_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rest.json");
    std::fs::write(
        &cfg,
        r#"{
  "run": {"dim": 1, "n": 16, "t_max": 0.2, "fixed_dt": 0.01, "vartheta": 2.0},
  "initial": {"kind": "rest"}
}"#,
    )
    .unwrap();
    let outdir = dir.path().join("out");
    let (code, _) = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--output-dir",
        outdir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(outdir.join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,dt,max_speed,Linf_du,Linf_dh,L2_euler_residual"
    );
    for line in lines {
        let du: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(du <= 1e-12, "rest state produced motion: {line}");
    }
    // snapshots exist and round-trip through the reader
    let snap = outdir.join("snap_0000.bin");
    assert!(snap.exists());
    let (_, _, fields) = releuler::fields::read_snapshot(&snap).unwrap();
    assert_eq!(fields[0].0, "h");
}

#[test]
fn missing_and_malformed_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(&[
        "simulate",
        "--config",
        dir.path().join("nope.json").to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    // unknown keys are schema errors
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{
  "run": {"dim": 1, "n": 16, "t_max": 0.1, "vartheta": 2.0, "what_is_this": 1},
  "initial": {"kind": "rest"}
}"#,
    )
    .unwrap();
    let (code, _) = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}
