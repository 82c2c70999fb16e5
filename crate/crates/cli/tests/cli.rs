use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_taylor-learn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn weights_central_difference() {
    let v = json(&run(&[
        "weights", "--nodes", "-1,0,1", "--order", "1", "--point", "0", "--exact",
    ]));
    let w: Vec<f64> = serde_json::from_value(v["weights"].clone()).unwrap();
    assert_eq!(w.len(), 3);
    for (got, want) in w.iter().zip([-0.5, 0.0, 0.5]) {
        assert!((got - want).abs() < 1e-15);
    }
    assert_eq!(v["exact_weights"], serde_json::json!([-0.5, 0.0, 0.5]));
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn weights_from_config_file() {
    let dir = scratch("weights_config");
    let cfg = dir.join("w.json");
    fs::write(&cfg, r#"{"nodes": [0, 1, 2], "order": 2, "point": 1}"#).unwrap();
    let v = json(&run(&["weights", "--config", path(&cfg)]));
    assert_eq!(v["weights"], serde_json::json!([1.0, -2.0, 1.0]));
}

#[test]
fn sample_fit_risk_pipeline() {
    let dir = scratch("pipeline");
    let data = dir.join("data.csv");
    let model = dir.join("model.json");
    let out = run(&[
        "sample",
        "--fn",
        "sin",
        "--dist",
        "gaussian:1",
        "--M",
        "2000",
        "--seed",
        "7",
        "--out",
        path(&data),
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(&data).unwrap();
    assert!(csv.starts_with("x,y\n"));
    assert_eq!(csv.lines().count(), 2001);

    let out = run(&[
        "fit",
        "--data",
        path(&data),
        "--N",
        "7",
        "--out",
        path(&model),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let file: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(file["model"]["coefficients"].as_array().unwrap().len(), 8);
    assert_eq!(file["digest"].as_str().unwrap().len(), 64);

    let report = json(&run(&[
        "risk",
        "--model",
        path(&model),
        "--fn",
        "sin",
        "--dist",
        "gaussian:1",
        "--T",
        "2",
        "--eps",
        "0.05",
        "--test-size",
        "20000",
    ]));
    let body = report["body_risk"].as_f64().unwrap();
    let i1 = report["I1_bound"].as_f64().unwrap();
    let i2 = report["I2_bound"].as_f64().unwrap();
    assert!(body <= i1 + i2 + 1e-8);
    assert_eq!(report["decomposition_holds"], Value::Bool(true));
    assert!(report["empirical_risk"].as_f64().unwrap() < 0.05);

    // Same data, same model.
    let again = dir.join("again.json");
    run(&[
        "fit",
        "--data",
        path(&data),
        "--N",
        "7",
        "--out",
        path(&again),
    ]);
    let second: Value = serde_json::from_str(&fs::read_to_string(&again).unwrap()).unwrap();
    assert_eq!(file["digest"], second["digest"]);
}

const TRIAL: &str = r#"{
    "fn": {"fn": "sin"},
    "dist": {"dist": "gaussian", "sigma": 1.0},
    "learner": {"N": 5},
    "eps": 0.05,
    "delta": 0.1,
    "M": 200,
    "trials": 8,
    "seed": 42,
    "test_size": 5000
}"#;

#[test]
fn trials_are_deterministic() {
    let dir = scratch("trial");
    let cfg = dir.join("trial.json");
    fs::write(&cfg, TRIAL).unwrap();
    let a = run(&["trial", "--config", path(&cfg), "--index", "3"]);
    let b = run(&["trial", "--config", path(&cfg), "--index", "3"]);
    assert_eq!(a.stdout, b.stdout);
    let rec = json(&a);
    assert_eq!(rec["seed"].as_u64().unwrap(), 42 ^ 3);

    let all = json(&run(&["trial", "--config", path(&cfg)]));
    assert_eq!(all["trials"].as_u64().unwrap(), 8);
    assert_eq!(all["records"][3], rec);

    let other = json(&run(&[
        "trial",
        "--config",
        path(&cfg),
        "--index",
        "3",
        "--seed",
        "43",
    ]));
    assert_ne!(other["model_digest"], rec["model_digest"]);
}

#[test]
fn bad_config_exits_2() {
    let dir = scratch("bad_config");
    let cfg = dir.join("trial.json");
    fs::write(&cfg, r#"{"fn": {"fn": "sin"}, "bogus": 1}"#).unwrap();
    assert_eq!(
        run(&["trial", "--config", path(&cfg)]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["weights", "--nodes", "0,1"]).status.code(), Some(2));
    assert_eq!(
        run(&["weights", "--nodes", "0,0", "--order", "1", "--point", "0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn non_entire_target_risk_exits_3() {
    let dir = scratch("capability");
    let data = dir.join("data.csv");
    let model = dir.join("model.json");
    assert!(run(&[
        "sample",
        "--fn",
        "runge:1",
        "--dist",
        "uniform:-0.5,0.5",
        "--M",
        "200",
        "--out",
        path(&data),
    ])
    .status
    .success());
    assert!(run(&[
        "fit",
        "--data",
        path(&data),
        "--N",
        "3",
        "--out",
        path(&model)
    ])
    .status
    .success());
    let out = run(&[
        "risk",
        "--model",
        path(&model),
        "--fn",
        "runge:1",
        "--dist",
        "uniform:-0.5,0.5",
        "--T",
        "1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn nonconvergent_complexity_exits_4() {
    let dir = scratch("nonconvergent");
    let cfg = dir.join("c.json");
    fs::write(
        &cfg,
        r#"{
            "fn": {"fn": "runge", "radius": 1.0},
            "dist": {"dist": "gaussian", "sigma": 2.0},
            "learner": {"N": 9},
            "eps": 0.05,
            "delta": 0.1,
            "trials": 10,
            "seed": 3,
            "test_size": 2000,
            "m_max": 256
        }"#,
    )
    .unwrap();
    let out = run(&["complexity", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(4));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["converged"], Value::Bool(false));
    assert_eq!(report["m_hat"], Value::Null);
}

#[test]
fn complexity_converges_on_cubic() {
    let dir = scratch("complexity");
    let cfg = dir.join("c.json");
    fs::write(
        &cfg,
        r#"{
            "fn": {"fn": "poly", "coeffs": [1.0, -2.0, 0.5, 0.25]},
            "dist": {"dist": "gaussian", "sigma": 1.0},
            "learner": {"N": 3},
            "eps": 0.05,
            "delta": 0.1,
            "trials": 10,
            "seed": 5,
            "test_size": 2000
        }"#,
    )
    .unwrap();
    let report = json(&run(&["complexity", "--config", path(&cfg)]));
    assert_eq!(report["converged"], Value::Bool(true));
    assert!(report["m_hat"].as_u64().unwrap() >= 4);
}

#[test]
fn sweep_writes_csv_and_plot_script() {
    let dir = scratch("sweep");
    let cfg = dir.join("sweep.json");
    let csv = dir.join("sweep.csv");
    fs::write(
        &cfg,
        format!(r#"{{"trial": {TRIAL}, "axis": {{"N": [1, 3, 5]}}}}"#),
    )
    .unwrap();
    let out = run(&[
        "sweep",
        "--config",
        path(&cfg),
        "--out",
        path(&csv),
        "--emit-plot-script",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "axis,value,median_risk,q25,q75,success_frequency,config_hash,seed"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows
        .iter()
        .all(|r| r.starts_with("N,") && r.ends_with(",42")));
    let script = fs::read_to_string(dir.join("sweep.py")).unwrap();
    assert!(script.contains("sweep.csv"));

    let again = run(&["sweep", "--config", path(&cfg)]);
    assert_eq!(again.stdout, text.as_bytes());
}

#[test]
fn empty_sweep_is_header_only() {
    let dir = scratch("empty_sweep");
    let cfg = dir.join("sweep.json");
    fs::write(
        &cfg,
        format!(r#"{{"trial": {TRIAL}, "axis": {{"M": []}}}}"#),
    )
    .unwrap();
    let out = run(&["sweep", "--config", path(&cfg)]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "axis,value,median_risk,q25,q75,success_frequency,config_hash,seed\n"
    );
}
