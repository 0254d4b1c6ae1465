use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mlht(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlht"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    root.to_str().unwrap().to_string()
}

fn ok(out: &Output) -> String {
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {stdout}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    stdout
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn reference_mlmc_and_report_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config("test1.json");

    let stdout = ok(&mlht(&["reference", "--config", &cfg, "--levels", "2", "--out", out]));
    assert!(stdout.contains("F_D = 1.3728"), "{stdout}");
    let r = json(dir.path().join("reference.json"));
    assert_eq!(r["cells"], 64);
    let fd = r["functionals"]["domain"][0].as_f64().unwrap();
    assert!((fd - 1.37293).abs() < 5e-4);

    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();
    ok(&mlht(&[
        "mlmc", "--config", &cfg, "--levels", "2", "--histories", "1000", "--epsilon", "5e-3", "--seed", "4",
        "--method", "hsm", "--out", run_s,
    ]));
    let result = json(run.join("result.json"));
    assert_eq!(result["method"], "hsm");
    assert_eq!(result["levels"].as_array().unwrap().len(), 3);
    let levels = std::fs::read_to_string(run.join("levels.csv")).unwrap();
    assert_eq!(levels.lines().count(), 4);
    let flux = std::fs::read_to_string(run.join("flux.csv")).unwrap();
    assert_eq!(flux.lines().count(), 1 + 16 + 32 + 64);

    let report = dir.path().join("report");
    let stdout = ok(&mlht(&[
        "report",
        "--input",
        run.join("result.json").to_str().unwrap(),
        "--reference",
        dir.path().join("reference.json").to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]));
    assert!(stdout.contains("rates.csv"), "{stdout}");
    let rates = std::fs::read_to_string(report.join("rates.csv")).unwrap();
    assert!(rates.starts_with("label,method,functional,epsilon,alpha,beta,gamma,N0,N1,N2,max_W"));
    assert!(report.join("levels_long.csv").exists());
}

#[test]
fn mlht_and_single_commands_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("test2_c05.json");
    let out = dir.path().join("ml");
    let stdout = ok(&mlht(&[
        "mlht", "--config", &cfg, "--levels", "1", "--samples", "6,3", "--histories", "500", "--out",
        out.to_str().unwrap(),
    ]));
    assert!(stdout.contains("level 1 N=3"), "{stdout}");
    let levels = std::fs::read_to_string(out.join("levels.csv")).unwrap();
    assert!(levels.starts_with("method,level,N,K,re_l2"));

    let single = dir.path().join("single");
    ok(&mlht(&[
        "single", "--config", &cfg, "--cells", "4,8", "--runs", "3", "--histories", "500", "--both", "--out",
        single.to_str().unwrap(),
    ]));
    let csv = std::fs::read_to_string(single.join("single.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);

    let exact = dir.path().join("exact");
    ok(&mlht(&[
        "mlht", "--config", &cfg, "--levels", "1", "--samples", "1,1", "--exact-closures", "--out",
        exact.to_str().unwrap(),
    ]));
    assert!(json(exact.join("result.json"))["partial"].as_array().unwrap().len() == 2);
}

#[test]
fn failed_checks_set_the_exit_status_only_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    // an unreachable tolerance: the budget stops the run after stage one and
    // the bias estimate exceeds eps / sqrt(2)
    let args = [
        "mlmc", "--levels", "1", "--histories", "300", "--epsilon", "1e-6", "--max-realizations", "50", "--out", out,
    ];
    ok(&mlht(&args));
    let mut strict = args.to_vec();
    strict.push("--check");
    let o = mlht(&strict);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stdout));
    let result = json(dir.path().join("result.json"));
    assert_eq!(result["status"]["kind"], "budget-exceeded");
    assert_eq!(result["weak_pass"], false);
}

#[test]
fn bad_input_is_reported() {
    let o = mlht(&["mlmc", "--functional", "cells:3"]);
    assert!(!o.status.success());
    let o = mlht(&["mlmc", "--config", "/nonexistent.json"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonexistent"));
}
