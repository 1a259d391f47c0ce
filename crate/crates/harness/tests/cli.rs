use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn sslm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sslm"))
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn run_writes_report_and_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let trace = dir.path().join("trace.txt");
    let status = sslm()
        .arg("run")
        .arg(root().join("scenarios/01_empty_field_drive.toml"))
        .args(["--seed", "3", "--report"])
        .arg(&report)
        .arg("--trace")
        .arg(&trace)
        .status()
        .unwrap();
    assert!(status.success());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["seed"], 3);
    assert_eq!(json["fouls"]["bot_crash_unique"], 0);
    assert!(fs::read_to_string(&trace).unwrap().starts_with("# t id x y"));
}

#[test]
fn env_override_changes_the_limits() {
    let out = sslm()
        .arg("run")
        .arg(root().join("scenarios/01_empty_field_drive.toml"))
        .env("SSLM_V_MAX", "1.0")
        .output()
        .unwrap();
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json["robots"][0]["max_speed"].as_f64().unwrap() <= 1.0 + 1e-9);
}

#[test]
fn malformed_scenario_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "name = \"bad\"\nduration_s = 1.0\nseed = 0\n[[robots]]\nid = 0\nstart = { position = [0.0, 0.0], heading = 0.0 }\ntarget = { kind = \"drive_to_point\", point = \"x\" }\n",
    )
    .unwrap();
    let out = sslm().arg("run").arg(&path).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("robots[0].target"), "{err}");
}

#[test]
fn parse_ref_prints_the_golden_timeline() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let out = sslm()
        .arg("parse-ref")
        .arg(data.join("half_game.log"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        fs::read_to_string(data.join("half_game.timeline")).unwrap()
    );
}

#[test]
fn replay_integrates_the_command_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("commands.log");
    fs::write(&log, "0.0 1.0 0.0 0.0\n0.5 0.0 1.0 0.0\n1.0 0.0 0.0 0.0\n").unwrap();
    let out = sslm().arg("replay").arg(&log).args(["--x", "-1.0"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let state: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let x = state["position"][0].as_f64().unwrap();
    let y = state["position"][1].as_f64().unwrap();
    assert!((x + 0.5).abs() < 1e-9 && (y - 0.5).abs() < 1e-9, "{state}");
}

#[test]
fn bench_reports_latency_percentiles() {
    let out = sslm().args(["bench", "--iters", "200"]).output().unwrap();
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["latency_ms"]["samples"], 200);
    assert_eq!(json["obstacles"], 15);
}
