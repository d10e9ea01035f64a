use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn choreo2c(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_choreo2c"))
        .args(args)
        .env_remove("CHOREO2C_THREADS")
        .output()
        .expect("binary runs")
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn predict_matches_library() {
    let out = choreo2c(&[
        "predict", "--alpha", "1", "--beta", "1", "--m", "1", "--M", "1", "--n", "3",
    ]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["format_version"], "choreo2c/1");
    assert_eq!(doc["config"]["M"], 1.0);
    let params = choreo2c::ProblemParams::new(1.0, 1.0, 1.0, 1.0, 3);
    let lib = choreo2c::predict(&params, 1e-12).unwrap();
    assert_eq!(doc["result"]["radius"].as_f64().unwrap(), lib.radius);
    assert_eq!(
        doc["result"]["lambda_tilde"].as_f64().unwrap(),
        lib.lambda_tilde
    );
}

#[test]
fn verify_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let args = [
            "verify",
            "--suite",
            "inequalities",
            "--paths",
            "1000",
            "--seed",
            "7",
            "--out",
        ];
        let status = choreo2c(&[&args[..], &[out.to_str().unwrap()]].concat()).status;
        assert!(status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let doc = json_file(&a);
    assert_eq!(doc["result"]["checked"], 4000);
    assert_eq!(doc["result"]["failed"], 0);
}

#[test]
fn sweep_csv_radius_increases() {
    let out = choreo2c(&["sweep", "--m", "0.5,1,2,4", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("# format_version=choreo2c/1"));
    assert_eq!(lines.next(), Some("m,lambda_tilde,radius,f_residual"));
    let radii: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(radii.len(), 4);
    assert!(radii.windows(2).all(|w| w[1] > w[0]), "{radii:?}");
}

#[test]
fn minimize_then_export() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("min.json");
    let csv = dir.path().join("bodies.csv");
    let args = [
        "minimize", "--order", "6", "--nodes", "128", "--starts", "2", "--seed", "4", "--out",
    ];
    let out = choreo2c(&[&args[..], &[json.to_str().unwrap()]].concat());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc = json_file(&json);
    assert_eq!(doc["config"]["seed"], 4);
    assert_eq!(doc["result"]["best"]["converged"], true);
    assert_eq!(
        doc["result"]["diagnostics"]["circle_fit"]["uniform_circular"],
        true
    );

    let out = choreo2c(&[
        "export",
        json.to_str().unwrap(),
        "--nodes",
        "8",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "body_index,t,x,y,z");
    assert_eq!(lines.len(), 2 + 3 * 8);
    assert!(lines[2 + 2 * 8].starts_with("2,"));
}

#[test]
fn exit_codes() {
    assert_eq!(choreo2c(&["predict", "--n", "1"]).status.code(), Some(1));
    assert_eq!(choreo2c(&["predict", "--unknown"]).status.code(), Some(1));
    assert_eq!(
        choreo2c(&["predict", "--out", "/no/such/dir/x.json"])
            .status
            .code(),
        Some(1)
    );
    let stalled = choreo2c(&[
        "minimize",
        "--order",
        "4",
        "--nodes",
        "64",
        "--starts",
        "1",
        "--max-iters",
        "2",
    ]);
    assert_eq!(stalled.status.code(), Some(2));
    assert!(!stalled.stderr.is_empty());
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_choreo2c"))
        .arg("predict")
        .env("CHOREO2C_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(1));
}

#[test]
fn thread_count_does_not_change_output() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_choreo2c"))
            .args(["minimize", "--order", "4", "--nodes", "64", "--starts", "3"])
            .env("CHOREO2C_THREADS", threads)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("3"));
}
