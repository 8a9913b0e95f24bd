//! End-to-end tests for the `roumieu` binary: exit codes, report artifacts,
//! suite filtering, determinism of repeated runs, and the explain renderer.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_roumieu"))
}

/// Small config exercising two cheap suites with one expected failure baked in.
fn passing_config() -> &'static str {
    r#"{
        "suites": ["weights", "komatsu"],
        "weights": [
            {"id": "g2", "family": "gevrey", "s": 2.0, "n": 48},
            {"id": "fact", "family": "factorial", "n": 48, "expect_fail": ["M3", "M3'"]}
        ],
        "sequences": [
            {"id": "geo", "rule": "geometric", "ratio": 3.0, "n": 24, "expect_growth": "slowly_increasing"},
            {"id": "invfact", "rule": "inverse_factorial", "n": 24, "expect_decay": "rapidly_decreasing"}
        ]
    }"#
}

/// Factorial weights without the expected-failure annotation: the run is
/// well formed but the expectation breaks, so the process must exit 1.
fn failing_config() -> &'static str {
    r#"{
        "suites": ["weights"],
        "weights": [
            {"id": "fact", "family": "factorial", "n": 48}
        ]
    }"#
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn run_in(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let cfg = write_config(dir, config);
    let out_dir = dir.join("out");
    bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .args(extra)
        .output()
        .unwrap()
}

fn read_report(dir: &Path) -> Value {
    let text = fs::read_to_string(dir.join("out").join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Removes wall-clock fields so two runs of the same config compare equal.
fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("duration_ms");
            map.remove("total_duration_ms");
            for child in map.values_mut() {
                strip_timing(child);
            }
        }
        Value::Array(items) => {
            for child in items {
                strip_timing(child);
            }
        }
        _ => {}
    }
}

#[test]
fn run_exits_zero_and_writes_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), passing_config(), &[]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report = read_report(dir.path());
    assert_eq!(report["pass"], Value::Bool(true));
    assert!(report["suites"]["weights"]["pass"].as_bool().unwrap());
    assert!(report["suites"]["komatsu"]["pass"].as_bool().unwrap());

    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS weights"), "stdout: {stdout}");
    assert!(stdout.contains("PASS komatsu"), "stdout: {stdout}");
}

#[test]
fn broken_expectation_exits_one_but_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), failing_config(), &[]);
    assert_eq!(out.status.code(), Some(1));

    let report = read_report(dir.path());
    assert_eq!(report["pass"], Value::Bool(false));
    assert!(!report["suites"]["weights"]["pass"].as_bool().unwrap());

    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL weights"), "stdout: {stdout}");
}

#[test]
fn missing_config_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("run")
        .arg(dir.path().join("does-not-exist.json"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "{ not json", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_suite_flag_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), passing_config(), &["--suites", "wieghts"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("wieghts"), "stderr: {stderr}");
}

#[test]
fn suites_flag_limits_the_report_to_the_selection() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), passing_config(), &["--suites", "weights"]);
    assert_eq!(out.status.code(), Some(0));

    let report = read_report(dir.path());
    let suites = report["suites"].as_object().unwrap();
    assert_eq!(suites.len(), 1);
    assert!(suites.contains_key("weights"));
}

#[test]
fn sequential_mode_matches_default_mode() {
    let auto_dir = tempfile::tempdir().unwrap();
    let seq_dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(auto_dir.path(), passing_config(), &[]).status.code(), Some(0));
    assert_eq!(
        run_in(seq_dir.path(), passing_config(), &["--parallel", "sequential"]).status.code(),
        Some(0)
    );

    let mut a = read_report(auto_dir.path());
    let mut b = read_report(seq_dir.path());
    strip_timing(&mut a);
    strip_timing(&mut b);
    assert_eq!(a, b);
}

#[test]
fn repeated_runs_are_identical_modulo_timing() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    assert_eq!(run_in(first.path(), passing_config(), &[]).status.code(), Some(0));
    assert_eq!(run_in(second.path(), passing_config(), &[]).status.code(), Some(0));

    let mut a = read_report(first.path());
    let mut b = read_report(second.path());
    strip_timing(&mut a);
    strip_timing(&mut b);
    assert_eq!(a, b);
}

#[test]
fn explain_renders_human_readable_sections() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), passing_config(), &[]).status.code(), Some(0));

    let out = bin()
        .arg("explain")
        .arg(dir.path().join("out").join("report.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("overall: PASS"), "stdout: {text}");
    assert!(text.contains("[weights] PASS"), "stdout: {text}");
    assert!(text.contains("[komatsu] PASS"), "stdout: {text}");
    assert!(text.contains("log-convexity"), "stdout: {text}");
}

#[test]
fn explain_on_missing_report_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("explain")
        .arg(dir.path().join("nope.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
