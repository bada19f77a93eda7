use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn exe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exploresim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// The single run directory under `out` whose name starts with `prefix`.
fn run_dir(out: &Path, prefix: &str) -> PathBuf {
    let dirs: Vec<_> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with(prefix))
        .collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&exe(&["--help"])), 0);
    assert_eq!(code(&exe(&["--version"])), 0);
    assert_eq!(code(&exe(&["eval", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&exe(&[])), 1);
    assert_eq!(code(&exe(&["eval", "--no-such-flag"])), 1);
    assert_eq!(code(&exe(&["eval", "--method", "teleport"])), 1);
    assert_eq!(code(&exe(&["eval", "--lsd-on", "maybe"])), 1);
}

#[test]
fn worldcheck_reports_bundled_world() {
    let out = exe(&["worldcheck", "test_b"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("world test_b"), "{text}");
    assert!(text.contains("clear true"), "{text}");
    assert!(text.contains("initial coverage"), "{text}");
}

#[test]
fn worldcheck_missing_world_is_runtime_error() {
    let out = exe(&["worldcheck", "/nonexistent/world.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn frontier_eval_writes_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().to_str().unwrap();
    let out = exe(&[
        "eval", "--world", "train_4x4", "--method", "frontier", "--trials", "2", "--seed", "5", "--out", out_dir,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dir = run_dir(tmp.path(), "eval-");
    let summary = json(&dir.join("summary.json"));
    assert_eq!(summary["method"], "frontier");
    assert_eq!(summary["trials"].as_array().unwrap().len(), 2);
    assert_eq!(summary["trials"][1]["seed"], 6);
    assert!(dir.join("trials/trials.csv").is_file());
}

#[test]
fn drl_eval_without_checkpoint_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = exe(&["eval", "--method", "drl", "--trials", "1", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn train_then_evaluate_policy_then_render() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().to_str().unwrap();
    let out = exe(&[
        "train", "--world", "train_4x4", "--total-steps", "256", "--rollout-len", "64", "--checkpoint-every", "2",
        "--out", out_dir,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let train = run_dir(tmp.path(), "train-");
    let policy = train.join("policy.json");
    assert!(policy.is_file());
    assert!(train.join("episodes.csv").is_file());
    assert!(train.join("checkpoints").is_dir());

    let out = exe(&[
        "eval", "--world", "train_4x4", "--method", "drl", "--trials", "1", "--max-steps", "40",
        "--checkpoint", policy.to_str().unwrap(), "--out", out_dir,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let eval = run_dir(tmp.path(), "eval-");
    assert_eq!(json(&eval.join("summary.json"))["method"], "drl");

    let record = std::fs::read_dir(eval.join("records")).unwrap().next().unwrap().unwrap().path();
    let render_out = tmp.path().join("rendered");
    let out = exe(&["render", "--record", record.to_str().unwrap(), "--out", render_out.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stem = record.file_stem().unwrap().to_str().unwrap();
    assert!(render_out.join(format!("plots/{stem}_trajectory.svg")).is_file());
    assert!(render_out.join(format!("maps/{stem}.pgm")).is_file());
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("run.json");
    std::fs::write(
        &cfg_path,
        r#"{"world": "train_4x4", "method": "frontier", "trials": 3, "seed": 40, "env": {"max_steps": 30}}"#,
    )
    .unwrap();
    let out = exe(&[
        "eval", "--config", cfg_path.to_str().unwrap(), "--trials", "1", "--out", tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dir = run_dir(tmp.path(), "eval-");
    let written = json(&dir.join("config.json"));
    assert_eq!(written["trials"], 1);
    assert_eq!(written["seed"], 40);
    assert_eq!(written["method"], "frontier");
    assert_eq!(written["env"]["max_steps"], 30);
    let summary = json(&dir.join("summary.json"));
    assert!(summary["trials"][0]["steps"].as_u64().unwrap() <= 30);
}

#[test]
fn malformed_config_is_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("bad.json");
    std::fs::write(&cfg_path, r#"{"trails": 3}"#).unwrap();
    let out = exe(&["eval", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}
