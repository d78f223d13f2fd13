mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::scenarios_dir;

fn plap(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plap")).args(args).arg("--out").arg(out).output().unwrap()
}

fn scenario(name: &str) -> String {
    scenarios_dir().join(format!("{name}.json")).to_string_lossy().into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn baseline_passes_and_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plap(&["run", &scenario("interval-baseline")], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let dir = tmp.path().join("interval-baseline");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["exit_code"], 0);
    let csv = std::fs::read_to_string(dir.join("solution.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 1025);
}

#[test]
fn beta_beyond_threshold_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plap(&["run", &scenario("interval-beta-over")], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn homogeneous_run_writes_continuation_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plap(&["run", &scenario("interval-homogeneous")], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(tmp.path().join("interval-homogeneous/continuation.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,q_n,sup_v,ln_sup_v,lambda_q"));
    assert_eq!(lines.count(), 8);
}

#[test]
fn malformed_scenarios_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let broken = write(tmp.path(), "broken.json", "{\"name\": \"x\", \"domain\": ");
    assert_eq!(plap(&["run", &broken], tmp.path()).status.code(), Some(1));
    let unknown = write(
        tmp.path(),
        "unknown.json",
        r#"{"name":"u","domain":{"kind":"interval","length":1},"h":0.01,
            "problem":{"form":"two-param","p":2,"q":1.5,"a":0.5,"b":0.5,"lambda":1,"gamma":3}}"#,
    );
    assert_eq!(plap(&["run", &unknown], tmp.path()).status.code(), Some(1));
    let bad_expr = write(
        tmp.path(),
        "expr.json",
        r#"{"name":"e","domain":{"kind":"interval","length":1},"h":0.01,
            "problem":{"form":"two-param","p":2,"q":1.5,"a":0.5,"b":0.5,"lambda":1,"w1":"1 + sin(x"}}"#,
    );
    assert_eq!(plap(&["run", &bad_expr], tmp.path()).status.code(), Some(1));
    let missing = tmp.path().join("absent.json");
    assert_eq!(plap(&["run", &missing.to_string_lossy()], tmp.path()).status.code(), Some(1));
}

#[test]
fn starved_iteration_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write(
        tmp.path(),
        "starved.json",
        r#"{"name":"starved","domain":{"kind":"interval","length":1},"h":0.0078125,
            "problem":{"form":"two-param","p":2,"q":1.5,"a":0.5,"b":0.5,"lambda":1,"beta":1},
            "frozen":{"max_iter":2}}"#,
    );
    assert_eq!(plap(&["run", &s], tmp.path()).status.code(), Some(3));
}

#[test]
fn thresholds_prints_json() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plap(&["thresholds", &scenario("example1-interval"), "--h", "0.00390625"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let star = v["lambda_star"].as_f64().unwrap();
    assert!((star - 3.0 * 3f64.powf(-0.25)).abs() < 1e-2 * star, "{star}");
}

#[test]
fn sweep_reports_worst_status() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("scn");
    std::fs::create_dir(&dir).unwrap();
    for name in ["interval-baseline", "interval-beta-over"] {
        std::fs::copy(scenario(name), dir.join(format!("{name}.json"))).unwrap();
    }
    let o = plap(&["sweep", &dir.to_string_lossy(), "--h", "0.0078125"], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().count(), 2, "{text}");
    assert!(tmp.path().join("out/interval-baseline/report.json").exists());
}
