//! End-to-end behaviour of the `itrp` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn models() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model(file: &str) -> String {
    models().join(file).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_itrp")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("itrp-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn shipped_datasets_regenerate_byte_for_byte() {
    for (toml, theta, csv) in [
        ("abc.toml", "k1=0.1,k2=0.1,A0=1", "abc.csv"),
        ("abc_rel.toml", "k1=0.1,k2=0.1,A0=1,s=1", "abc_rel.csv"),
    ] {
        let out = run(&["simulate-data", "--model", &model(toml), "--theta", theta, "--seed", "195"]);
        assert_eq!(out.status.code(), Some(0));
        let shipped = std::fs::read(models().join(csv)).unwrap();
        assert_eq!(out.stdout, shipped, "{csv} differs from a fresh simulation");
    }
}

#[test]
fn fit_writes_a_report_and_the_start_table() {
    let dir = scratch("fit");
    let out = run(&[
        "fit",
        "--model",
        &model("abc.toml"),
        "--data",
        &model("abc.csv"),
        "--nstarts",
        "2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["command"], "fit");
    assert_eq!(report["exit_code"], 0);
    assert_eq!(report["result"]["parameters"], serde_json::json!(["k1", "k2", "A0"]));
    let starts = std::fs::read_to_string(dir.join("starts.csv")).unwrap();
    assert_eq!(starts.lines().count(), 3, "{starts}");
    assert!(starts.starts_with("start,value,"));
}

#[test]
fn the_exit_code_reports_the_verdict() {
    let rel = run(&["itrp", "--model", &model("abc_rel.toml"), "--data", &model("abc_rel.csv")]);
    assert_eq!(rel.status.code(), Some(10));
    let report: Value = serde_json::from_slice(&rel.stdout).unwrap();
    assert_eq!(report["result"]["verdict"], "non-identifiable");
    assert_eq!(report["exit_code"], 10);

    let abc = run(&["itrp", "--model", &model("abc.toml"), "--data", &model("abc.csv")]);
    assert_eq!(abc.status.code(), Some(0));
}

#[test]
fn a_single_profile_lands_in_its_own_table() {
    let dir = scratch("profile");
    let out = run(&[
        "profile",
        "--model",
        &model("abc.toml"),
        "--data",
        &model("abc.csv"),
        "--profile",
        "k2",
        "--points",
        "5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.join("profile_k2.csv")).unwrap();
    assert_eq!(table.lines().count(), 6, "{table}");
    assert!(!dir.join("profile_k1.csv").exists());
}

#[test]
fn bad_input_exits_with_one() {
    let cases: [&[&str]; 4] = [
        &["fit", "--model", "/nonexistent/model.toml", "--data", "/nonexistent/data.csv"],
        &["simulate-data", "--model", &model("abc.toml"), "--theta", "k9=1"],
        &["radial-profile", "--model", &model("abc.toml"), "--data", &model("abc.csv"), "--rgrid", "2:1:5"],
        &["itrp", "--model", &model("abc.toml"), "--data", &model("abc.csv"), "--positive-control", "nope"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{args:?}");
    }
}
