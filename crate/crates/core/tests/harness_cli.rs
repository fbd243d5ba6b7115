use std::fs;
use std::path::Path;
use std::process::Command;

use robust_admm::harness::{
    prepare, run_experiment, synth_regression, synth_svm, trace_csv, ErrorSpec, ExperimentConfig, PenaltySpec,
    TRACE_HEADER,
};

const BIN: &str = env!("CARGO_BIN_EXE_robust-admm");

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

#[test]
fn synthetic_instances_are_reproducible() {
    assert_eq!(synth_regression(9, 10, 3), synth_regression(9, 10, 3));
    assert_ne!(synth_regression(9, 10, 3), synth_regression(10, 10, 3));
    assert_eq!(synth_svm(9, 10, 1000).unwrap(), synth_svm(9, 10, 1000).unwrap());
}

#[test]
fn svm_shards_are_balanced() {
    let inst = synth_svm(42, 10, 1000).unwrap();
    assert_eq!(inst.shards.len(), 10);
    for (feats, labels) in &inst.shards {
        assert_eq!(feats.len(), 100);
        assert_eq!(labels.iter().filter(|&&l| l == 1.0).count(), 50);
        assert_eq!(labels.iter().filter(|&&l| l == -1.0).count(), 50);
    }
    assert!(synth_svm(42, 3, 1000).is_err());
}

#[test]
fn regression_minimizer_is_finite_and_conditioned() {
    let inst = synth_regression(42, 10, 3);
    let kappa = inst.normal_condition_number();
    assert!(kappa.is_finite() && kappa >= 1.0);
    println!("normal-equation condition number at seed 42: {kappa:.3}");
    let prep = prepare(&ExperimentConfig::regression()).unwrap();
    assert!(prep.problem.x_star.iter().all(|v| v.is_finite()));
}

#[test]
fn config_json_round_trip_and_defaults() {
    let cfg = ExperimentConfig::regression();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    let partial = ExperimentConfig::from_json(r#"{"c": 0.9, "t": 50, "errors": {"kind": "none"}}"#).unwrap();
    assert_eq!(partial.c, PenaltySpec::Value(0.9));
    assert_eq!(partial.t, 50);
    assert_eq!(partial.errors, ErrorSpec::None);
    assert_eq!(partial.agents, 10);
    assert!(ExperimentConfig::from_json(r#"{"c": "fast"}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"c": -1}"#).is_err());
}

#[test]
fn library_runs_are_deterministic() {
    let mut cfg = ExperimentConfig::regression();
    cfg.t = 60;
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(trace_csv(&a.trace), trace_csv(&b.trace));
    assert!(trace_csv(&a.trace).starts_with(&format!("{TRACE_HEADER}\n")));
}

#[test]
fn cli_outputs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = cli(&["regression", "--algo", "road", "--t", "80", "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["trace.csv", "bounds.csv", "flags.csv", "plot.csv", "constants.json"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs");
    }
    let trace = String::from_utf8(read(&a, "trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), TRACE_HEADER);
    assert_eq!(trace.lines().count(), 82);
}

#[test]
fn cli_validation_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().to_str().unwrap();
    for args in [
        vec!["regression", "--agents", "1", "--out", out_dir],
        vec!["regression", "--c", "-3", "--out", out_dir],
        vec!["regression", "--edges", "0-1,2-3", "--agents", "4", "--out", out_dir],
        vec!["regression", "--unreliable", "11", "--out", out_dir],
        vec!["svm", "--c", "opt", "--out", out_dir],
    ] {
        let out = cli(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn cli_flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"t": 500, "c": 0.9, "errors": {"kind": "none"}, "unreliable": 0}"#).unwrap();
    let out_dir = tmp.path().join("o");
    let out = cli(&["regression", "--config", cfg.to_str().unwrap(), "--t", "12", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = String::from_utf8(read(&out_dir, "trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 14);
    assert!(String::from_utf8_lossy(&out.stdout).contains("c=0.900000"));
}

#[test]
fn cli_theory_and_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    let out = cli(&["theory", "--topology", "complete", "--agents", "10", "--problem", "regression", "--seed", "1", "--out", d]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("threshold met"));
    let json: serde_json::Value = serde_json::from_slice(&read(tmp.path(), "constants.json")).unwrap();
    assert!(json.get("spectra").is_some());
    let out = cli(&["sweep", "--t", "40", "--mu-bs", "0,1", "--cs", "opt,0.9", "--out", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = String::from_utf8(read(tmp.path(), "sweep.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn cli_verify_passes_on_error_free_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(&["verify", "--unreliable", "0", "--t", "100", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn cli_scripted_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let script = tmp.path().join("e.csv");
    let prep = prepare(&ExperimentConfig::regression()).unwrap();
    let agent = prep.unreliable[0];
    fs::write(&script, format!("k,agent,e1,e2,e3\n3,{agent},5,0,0\n")).unwrap();
    let out_dir = tmp.path().join("o");
    let out = cli(&["regression", "--t", "6", "--script", script.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
