use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn neuralgc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neuralgc"))
        .args(args)
        .env("NGC_WORKERS", "1")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: serde_json::Value) -> String {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn small_var_config(out: &Path) -> serde_json::Value {
    serde_json::json!({
        "task": "var3",
        "var": { "num_series": 4, "length": 150, "burn_in": 50 },
        "max_lag": 3,
        "models": ["VAR"],
        "lr_grid": [0.01],
        "lambda_grid": [0.001],
        "train": { "epochs": 5 },
        "seeds": [0],
        "output_dir": out,
    })
}

#[test]
fn simulate_then_score_recovers_a_perfect_ranking() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = neuralgc(&["simulate", "--task", "var3", "--num-series", "5", "--length", "120", "--output-dir", out]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let panel = fs::read_to_string(dir.path().join("panel.csv")).unwrap();
    assert_eq!(panel.lines().count(), 121);
    let truth = fs::read_to_string(dir.path().join("truth.csv")).unwrap();

    let scores = format!("X0,X1,X2,X3,X4\n{truth}");
    fs::write(dir.path().join("scores.csv"), scores).unwrap();
    let s = dir.path().join("scores.csv");
    let t = dir.path().join("truth.csv");
    let res = neuralgc(&["score", "--scores", s.to_str().unwrap(), "--truth", t.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let metrics: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(metrics["auroc"], 1.0);
    assert_eq!(metrics["aupr"], 1.0);
    assert_eq!(metrics["include_diagonal"], true);
}

#[test]
fn run_writes_results_and_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), small_var_config(&out));
    let res = neuralgc(&["run", "--config", &cfg, "--seeds", "3", "--epochs", "2"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let run_dir = out.join("var3/VAR/3");
    for f in ["results.json", "gc_scores.csv", "gc_binary.csv", "history.csv", "lag_scores.csv"] {
        assert!(run_dir.join(f).exists(), "missing {f}");
    }
    let history = fs::read_to_string(run_dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 2, "{history}");
}

#[test]
fn unknown_model_is_a_validation_error_with_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut body = small_var_config(&out);
    body["models"] = serde_json::json!(["VAR", "cGRU"]);
    body["seeds"] = serde_json::json!([]);
    let cfg = write_config(dir.path(), body);
    let res = neuralgc(&["run", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("cGRU") && err.contains("seeds"), "{err}");
    assert!(!out.exists());
}

#[test]
fn failed_runs_give_a_nonzero_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), small_var_config(&out));
    let res = neuralgc(&["run", "--config", &cfg, "--lr-grid", "1e300"]);
    assert_eq!(res.status.code(), Some(1), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("var3/results.json")).unwrap()).unwrap();
    assert_eq!(report["failures"].as_array().unwrap().len(), 1);
}

#[test]
fn sliding_window_writes_one_directory_per_window() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let res = neuralgc(&[
        "simulate",
        "--num-series",
        "3",
        "--length",
        "300",
        "--output-dir",
        sim.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        serde_json::json!({
            "task": "sliding-window",
            "panel_path": sim.join("panel.csv"),
            "max_lag": 2,
            "models": ["cMLPwF"],
            "lr_grid": [0.01],
            "lambda_grid": [0.001],
            "train": { "epochs": 2 },
            "standardize": true,
            "sliding": { "window_len": 200, "overlap": 0.5, "sampling_rate": 100.0 },
            "seeds": [0],
            "output_dir": out,
        }),
    );
    let res = neuralgc(&["sliding-window", "--config", &cfg]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let windows = out.join("sliding-window/cMLPwF/0/windows");
    let mut names: Vec<String> = fs::read_dir(&windows)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["0s", "1s"]);
    assert!(windows.join("0s/gc_binary.csv").exists());
}

#[test]
fn grad_check_passes() {
    let res = neuralgc(&["grad-check", "--points", "2"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("cLSTMwF") && text.contains("all passed"), "{text}");
}
