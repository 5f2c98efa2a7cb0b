//! The `edgebif` binary: exit codes, output files, and the report format.

use std::process::{Command, Stdio};

use edgebif::report::VerificationReport;

fn edgebif() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_edgebif"));
    cmd.stderr(Stdio::null());
    cmd
}

#[test]
fn usage_errors_exit_with_2() {
    let status = edgebif().args(["scan", "--no-such-flag"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = edgebif().args(["verify", "--grid-points", "8"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = edgebif().args(["residual", "--modes", "4"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn scan_writes_csv_with_fixed_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let status = edgebif()
        .args(["scan", "--p", "3.8", "--format", "csv", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,eps,z,alpha,ratio"));
    let fields: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|f| f.parse().unwrap())
        .collect();
    assert_eq!(fields.len(), 5);
    assert!((fields[0] - 3.8).abs() < 1e-12 && fields[2] > 0.9 && fields[2] < 1.0);
}

#[test]
fn under_resolved_verify_fails_checks_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify.json");
    let status = edgebif()
        .args(["verify", "--grid-points", "16", "--seed", "5", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let text = std::fs::read_to_string(&out).unwrap();
    let report: VerificationReport = serde_json::from_str(&text).unwrap();
    assert!(!report.pass);
    assert!(!report.failed().is_empty());
    assert_eq!(report.schema_version, 1);
    let again = serde_json::to_string_pretty(&report).unwrap() + "\n";
    assert_eq!(again, text);
}
