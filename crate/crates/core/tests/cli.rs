use std::path::Path;
use std::process::{Command, Output};

fn curvlines(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvlines")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const LEMON: &str = r#"{
  "surface": {"kind": "monge", "h": "(u^2 + v^2)/2 + 3*u^3/6 + u*v^2/2", "domain": [-0.3, 0.3, -0.3, 0.3]},
  "mode": "analyze"
}"#;

const FAMILY: &str = r#"{
  "surface": {"kind": "monge", "h": "(u^2 + v^2)/2 + lambda*u^3/6 + u*v^2/2 + v^3/3", "domain": [-0.3, 0.3, -0.3, 0.3]},
  "mode": "sweep",
  "sweep": {"seeds": [[2.5, 0.0, 0.0]]}
}"#;

#[test]
fn analyze_prints_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", LEMON);
    let out = curvlines(&["analyze", "--config", &cfg, "--quiet"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], "1.0.0");
    assert_eq!(v["umbilics"].as_array().unwrap().len(), 1);
    assert_eq!(v["umbilics"][0]["record"]["classification"]["class"], "D1");
}

#[test]
fn portrait_writes_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", LEMON);
    let dir = tmp.path().join("out");
    let out = curvlines(&["portrait", "--config", &cfg, "--out", dir.to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "report.schema.json", "portrait.svg"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let svg = std::fs::read_to_string(dir.join("portrait.svg")).unwrap();
    assert!(svg.contains("<circle class=\"umbilic\""));
    assert_eq!(svg.matches("separatrix").count(), 2);
}

#[test]
fn range_flag_overrides_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", FAMILY);
    // no range in the file: a config error
    let out = curvlines(&["sweep", "--config", &cfg, "--quiet"]);
    assert_eq!(out.status.code(), Some(2));
    let out = curvlines(&["sweep", "--config", &cfg, "--lambda-range", "2.5:3.5:3", "--quiet"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["lambda_range"]["steps"], 3);
    let events = v["events"].as_array().unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["event"]["kind"]["type"], "D12Transition");
    assert_eq!(events[0]["branch"], 0);
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("none.json");
    assert_eq!(curvlines(&["analyze", "--config", missing.to_str().unwrap(), "--quiet"]).status.code(), Some(2));
    let bad = write(tmp.path(), "bad.json", r#"{"surface": {"kind": "monge", "h": "u^", "domain": [-1, 1, -1, 1]}, "mode": "analyze"}"#);
    assert_eq!(curvlines(&["analyze", "--config", &bad, "--quiet"]).status.code(), Some(2));
    let unknown = write(tmp.path(), "unknown.json", &LEMON.replace("\"mode\"", "\"colour\": 1, \"mode\""));
    assert_eq!(curvlines(&["analyze", "--config", &unknown, "--quiet"]).status.code(), Some(2));
    let cfg = write(tmp.path(), "c.json", LEMON);
    assert_eq!(curvlines(&["analyze", "--config", &cfg, "--tol-umbilic", "-1", "--quiet"]).status.code(), Some(2));
}

#[test]
fn compute_errors_exit_with_3() {
    // sqrt of a negative number all over the domain
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"surface": {"kind": "monge", "h": "sqrt(-1 - u^2 - v^2)", "domain": [-0.3, 0.3, -0.3, 0.3]}, "mode": "analyze"}"#,
    );
    let out = curvlines(&["analyze", "--config", &cfg, "--quiet"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!v["errors"].as_array().unwrap().is_empty());
}

#[test]
fn schema_subcommand() {
    let out = curvlines(&["schema", "config"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["title"], "AnalysisConfig");
}
