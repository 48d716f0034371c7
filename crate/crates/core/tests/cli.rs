use std::path::Path;
use std::process::{Command, Output};

fn fedmr(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedmr"))
        .arg("--no-env")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn iv_run_verifies_and_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("iv");
    let r = fedmr(&out, &["iv", "--power", "400", "--rf", "off", "--u-range", "0:60:10"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = std::fs::read_to_string(out.join("iv.csv")).unwrap();
    let manifest = json(&out.join("manifest.json"));
    assert!(csv.starts_with("# schema=fedmr-csv/1 manifest="));
    assert_eq!(csv.lines().count(), 2 + 7);
    assert!(manifest["files"]["iv.csv"].is_string());

    let ok = fedmr(&out, &["verify", out.to_str().unwrap()]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));

    std::fs::write(out.join("iv.csv"), csv.replacen("e0", "e1", 1)).unwrap();
    let bad = fedmr(&out, &["verify", out.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(4));
}

#[test]
fn calibration_round_trips_through_iv_output() {
    let tmp = tempfile::tempdir().unwrap();
    let iv = tmp.path().join("iv");
    let r = fedmr(&iv, &["iv", "--power", "400", "--rf", "off", "--u-range", "0:150:10"]);
    assert!(r.status.success());
    let cal = tmp.path().join("cal");
    let data = iv.join("iv.csv");
    let r = fedmr(&cal, &["calibrate", "--data", data.to_str().unwrap(), "--phi1", "0.9"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let fit = json(&cal.join("calibration.json"));
    let phi1 = fit["phi1_V"].as_f64().unwrap();
    assert!((phi1 - 1.2).abs() < 1e-6, "phi1 = {phi1}");
    assert_eq!(fit["schema"], "fedmr-json/1");
}

#[test]
fn solver_failure_exits_3_with_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fail");
    let r = fedmr(
        &out,
        &["--set", "solver.newton_max_iterations=1", "iv", "--power", "400", "--u-range", "100:100:1"],
    );
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
    let diag = json(&out.join("failure.json"));
    assert_eq!(diag["command"], "iv");
}

#[test]
fn bad_input_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bad");
    let r = fedmr(&out, &["--set", "material.eps_s=-1", "iv"]);
    assert_eq!(r.status.code(), Some(2));
    let r = fedmr(&out, &["iv", "--u-range", "10:0:5"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn missing_data_file_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let r = fedmr(&tmp.path().join("x"), &["calibrate", "--data", "/nonexistent/iv.csv"]);
    assert_eq!(r.status.code(), Some(2));
}
