use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn polymerlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polymerlab"))
        .args(args)
        .env_remove("POLYMERLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn enumerate_two_steps() {
    let v = json(&polymerlab(&["enumerate", "--family", "simple", "--n", "2", "--beta", "0.5"]));
    let z = v["result"]["z"].as_f64().unwrap();
    assert!((z - (1.0 + (-1.0f64).exp()) / 2.0).abs() < 1e-12);
    assert_eq!(v["config"]["n"], 2);
    assert!(v["polymerlab"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
}

#[test]
fn self_avoiding_from_infinite_beta() {
    let v = json(&polymerlab(&["enumerate", "--n", "10", "--beta", "inf"]));
    assert!((v["result"]["z"].as_f64().unwrap() - 2f64.powi(-9)).abs() < 1e-15);
    assert_eq!(v["config"]["beta"], "inf");
}

#[test]
fn exit_codes() {
    assert_eq!(polymerlab(&["enumerate", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(polymerlab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(polymerlab(&["enumerate"]).status.code(), Some(2));
    assert_eq!(polymerlab(&["enumerate", "--n", "4", "--family", "bogus"]).status.code(), Some(2));
    assert_eq!(polymerlab(&["enumerate", "--n", "4", "--beta", "0.2", "--gamma", "0.5"]).status.code(), Some(2));
    let budget = polymerlab(&["enumerate", "--family", "uniform_range", "--L", "4", "--n", "40"]);
    assert_eq!(budget.status.code(), Some(3));
    assert_eq!(polymerlab(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_thread_variable_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_polymerlab"))
        .args(["enumerate", "--n", "2"])
        .env("POLYMERLAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mc_is_reproducible_and_thread_independent() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_polymerlab"))
            .args(["mc", "--n", "12", "--beta", "0.3", "--tours", "200", "--replicas", "4", "--seed", "9"])
            .env("POLYMERLAB_THREADS", threads)
            .output()
            .unwrap()
    };
    let a = run("1");
    let b = run("3");
    assert!(a.status.success());
    let (mut va, mut vb) = (json(&a), json(&b));
    assert_eq!(va["config"]["threads"], 1);
    // the thread count is echoed but must not change any number
    va["config"]["threads"] = Value::Null;
    vb["config"]["threads"] = Value::Null;
    assert_eq!(va, vb);
    assert_eq!(va["seed"], 9);
    assert_eq!(va["result"]["replicas"].as_array().unwrap().len(), 4);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let out = polymerlab(&[
        "mc",
        "--family",
        "uniform_range",
        "--L",
        "2",
        "--n",
        "10",
        "--beta",
        "0.1",
        "--tours",
        "100",
        "--replicas",
        "3",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    let mut cfg = v["config"].clone();
    let second = dir.path().join("second.json");
    cfg["out"] = Value::String(second.to_str().unwrap().into());
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out = polymerlab(&["mc", "--config", cfg_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let w: Value = serde_json::from_str(&std::fs::read_to_string(&second).unwrap()).unwrap();
    assert_eq!(v["result"], w["result"]);
}

#[test]
fn config_file_fields_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"n": 3, "beta": 0.5}"#).unwrap();
    let v = json(&polymerlab(&["enumerate", "--config", cfg.to_str().unwrap(), "--n", "2"]));
    assert_eq!(v["result"]["n"], 2);
    std::fs::write(&cfg, r#"{"n": 3, "betta": 0.5}"#).unwrap();
    assert_eq!(polymerlab(&["enumerate", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn renewal_report() {
    let v = json(&polymerlab(&["renewal", "--family", "simple", "--n", "3"]));
    let r = &v["result"];
    for key in ["c", "pi", "eps", "residuals", "z", "A"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["c"][1], 0.5);
    assert_eq!(r["pi"][1], 0.125);
    assert!(r["hypothesis"].is_string());

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"beta": 0.05, "pieces": 6, "eta": 0.5}"#).unwrap();
    let v = json(&polymerlab(&["renewal", "--config", cfg.to_str().unwrap()]));
    let z = v["result"]["z"].as_f64().unwrap();
    assert!((z - 1.0).abs() < 0.2);
    assert_eq!(v["result"]["A"].as_array().unwrap().len(), 7);
}

#[test]
fn lemma_bn_series_csv() {
    let out = polymerlab(&["lemma-bn", "--n", "50", "--L", "2", "--family", "uniform_range", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# polymerlab"));
    assert!(text.contains("# config: "));
    let out = polymerlab(&["lemma-bn", "--n", "5", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rate_curves() {
    let out = polymerlab(&["rate", "--n", "8", "--beta", "0.3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 22);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"rate_method": "legendre", "thetas": [0.5, 0.6]}"#).unwrap();
    let v = json(&polymerlab(&["rate", "--n", "8", "--beta", "0.3", "--format", "json", "--config", cfg.to_str().unwrap()]));
    assert_eq!(v["result"]["points"].as_array().unwrap().len(), 2);
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn sweep_writes_csv_and_companion_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"betas": [0.4, 0.3, 0.2], "n_scale": 10, "tours": 100, "replicas": 4}"#).unwrap();
    let csv = dir.path().join("r.csv");
    let out = polymerlab(&["sweep", "beta", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&csv);
    for col in ["experiment", "n", "theta_hat", "theta_se", "r_hat", "r_se", "sigma_star_hat", "scaled_theta", "scaled_r", "ess"] {
        assert!(header.iter().any(|h| h == col), "missing column {col}");
    }
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[0] == "beta"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(csv.with_extension("json")).unwrap()).unwrap();
    assert_eq!(v["result"]["reference"]["theta_exponent"].as_f64().unwrap(), 1.0 / 3.0);
    assert_eq!(v["config"]["experiment"], "beta");
}

#[test]
fn sweep_rejects_invalid_schedule_without_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"schedule": {"kind": "beta_power", "a": 2.0}, "ns": [8, 16, 32], "tours": 50, "replicas": 2, "anchor": false}"#).unwrap();
    let out = polymerlab(&["sweep", "coupled", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = polymerlab(&["sweep", "coupled", "--config", cfg.to_str().unwrap(), "--allow-invalid-schedule"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn selftest_passes() {
    let out = polymerlab(&["selftest"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}
