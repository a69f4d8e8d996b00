use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tvoc(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvoc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn tv_report_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = tvoc(dir.path(), &["tv", "--alpha", "0.589"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc = read_json(&dir.path().join("tv.json"));
    assert_eq!(doc["optimality"]["passed"], Value::Bool(true));
    let t1 = doc["solution"]["t1"].as_f64().unwrap();
    let t2 = doc["solution"]["t2"].as_f64().unwrap();
    assert!((t1 + t2 - 1.0).abs() < 1e-12);
}

#[test]
fn energy_csv_is_the_linear_control() {
    let dir = tempfile::tempdir().unwrap();
    let out = tvoc(dir.path(), &["energy", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,u,x1,x2,eta"));
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[1] - (6.0 * v[0] - 4.0)).abs() < 1e-12);
    }
}

#[test]
fn verify_agrees_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = tvoc(dir.path(), &["verify", "--alpha", "1", "--n", "2000"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc = read_json(&dir.path().join("verify.json"));
    let c = &doc["comparison"];
    assert!(c["objective_gap_relative"].as_f64().unwrap() < 1e-3);
    assert!(c["control_linf_gap"].as_f64().unwrap() < 5e-3);
    assert!(c["eta_linf_gap"].as_f64().unwrap() < 5e-3);
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["pareto", "--alphas", "log:1e-3:1e3:30"];
    assert_eq!(tvoc(a.path(), &args).status.code(), Some(0));
    assert_eq!(tvoc(b.path(), &args).status.code(), Some(0));
    for f in ["front.csv", "front.json", "frames.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn pareto_svg_writes_frames() {
    let dir = tempfile::tempdir().unwrap();
    let out = tvoc(
        dir.path(),
        &["pareto", "--alphas", "0,0.589,inf", "--format", "svg"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("front.svg").exists());
    let n = std::fs::read_dir(dir.path().join("frames"))
        .unwrap()
        .count();
    assert_eq!(n, 3);
}

#[test]
fn invalid_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["tv"],
        vec!["tv", "--alpha=-1"],
        vec!["tv", "--alpha", "nan"],
        vec!["oracle", "--alpha", "1", "--n", "1"],
        vec!["oracle", "--alpha", "1", "--tol", "0"],
        vec!["lqptv"],
        vec!["pareto", "--alphas", "1,1"],
        vec!["frobnicate"],
    ] {
        let out = tvoc(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn bad_thread_count_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tvoc"))
        .args(["energy", "--out"])
        .arg(dir.path())
        .env("TVOC_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_1_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = tvoc(
        dir.path(),
        &[
            "oracle",
            "--alpha",
            "1",
            "--max-iter",
            "1",
            "--tol",
            "1e-14",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let diag = read_json(&dir.path().join("diagnostic.json"));
    assert_eq!(diag["command"], "oracle");
}

#[test]
fn partial_front_needs_allow_unverified() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--bc", "0,1,0,0", "pareto", "--alphas", "0.5,inf"];
    assert_eq!(tvoc(dir.path(), &args).status.code(), Some(1));
    assert!(dir.path().join("diagnostic.json").exists());
    let mut allowed = args.to_vec();
    allowed.push("--allow-unverified");
    assert_eq!(tvoc(dir.path(), &allowed).status.code(), Some(0));
}

#[test]
fn lqptv_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("p.json");
    std::fs::write(
        &problem,
        r#"{"n":2,"m":1,"n_steps":200,"alpha":0.4,"x0":[0,1],"xf":[0,0],
            "a":[[0,1],[0,0]],"b":[[0],[1]],"q":[[0,0],[0,0]],"r":[[1]]}"#,
    )
    .unwrap();
    let out = tvoc(
        dir.path(),
        &["lqptv", "--problem", problem.to_str().unwrap()],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc = read_json(&dir.path().join("lqptv.json"));
    assert!(doc["solution"]["kkt_residual"].as_f64().unwrap() < 1e-6);
}
