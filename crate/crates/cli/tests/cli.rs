use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sipkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sipkit")).args(args).output().unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn without_wall_time(mut v: Value) -> String {
    v.as_object_mut().unwrap().remove("wall_time_s");
    v.to_string()
}

#[test]
fn list_names_every_experiment() {
    for args in [&["list"][..], &["--list"][..]] {
        let o = sipkit(args);
        assert!(o.status.success());
        let text = String::from_utf8(o.stdout).unwrap();
        for e in sipkit::Experiment::ALL {
            assert!(text.contains(e.name()), "{} missing", e.name());
        }
    }
}

#[test]
fn quadrants_pass_and_write_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = sipkit(&["run", "--experiment", "contour-quadrants", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path());
    assert_eq!(s["experiment"], "contour-quadrants");
    assert_eq!(s["seed"], 3);
    assert!(s["wall_time_s"].is_f64());
    let checks = s["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 5);
    for c in checks {
        for k in ["name", "value", "target", "tol", "pass"] {
            assert!(c.get(k).is_some(), "check lacks {k}");
        }
        assert_eq!(c["pass"], true);
    }
    let csv = std::fs::read_to_string(dir.path().join("quadrants.csv")).unwrap();
    assert!(csv.starts_with("x0,x1,y0,y1,probability"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn same_config_gives_identical_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"experiment": "data-consistent", "seed": 7, "params": {"dc_cells": 20, "dc_validation_samples": 20000}}"#).unwrap();
    let runs: Vec<String> = ["a", "b"]
        .iter()
        .map(|d| {
            let out = dir.path().join(d);
            let o = sipkit(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
            assert!(o.status.code().is_some_and(|c| c == 0 || c == 2), "{}", String::from_utf8_lossy(&o.stderr));
            without_wall_time(summary(&out))
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let a = std::fs::read(dir.path().join("a/posterior_uniform_prior.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b/posterior_uniform_prior.csv")).unwrap());
}

#[test]
fn failed_golden_number_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    // a single mesh too coarse to resolve the process gives different levels
    std::fs::write(&cfg, r#"{"params": {"truncation_meshes": [11], "alpha": 0.999999}}"#).unwrap();
    let o = sipkit(&["run", "--experiment", "truncation-study", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stdout));
    let s = summary(dir.path());
    assert!(s["checks"].as_array().unwrap().iter().any(|c| c["pass"] == false));
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(sipkit(&["run", "--experiment", "nope", "--out", out]).status.code(), Some(1));
    assert_eq!(sipkit(&["run", "--out", out]).status.code(), Some(1));
    assert_eq!(sipkit(&["run", "--experiment", "contour-quadrants", "--threads", "0", "--out", out]).status.code(), Some(1));
    assert_eq!(sipkit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sipkit(&[]).status.code(), Some(1));
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"params": {"no_such_field": 1}}"#).unwrap();
    assert_eq!(sipkit(&["run", "--experiment", "contour-quadrants", "--config", cfg.to_str().unwrap(), "--out", out]).status.code(), Some(1));
    assert_eq!(sipkit(&["run", "--config", "/nonexistent/cfg.json"]).status.code(), Some(1));
    assert_eq!(sipkit(&["--help"]).status.code(), Some(0));
}
