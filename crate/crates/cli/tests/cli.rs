//! Exit codes and end-to-end runs of the `tempfuser` binary.

use std::path::Path;
use std::process::{Command, Output};

fn tempfuser(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tempfuser"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn version_prints_a_semantic_version() {
    let out = tempfuser(&["version"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let v = text.trim().strip_prefix("tempfuser ").unwrap();
    let parts: Vec<&str> = v.split('.').collect();
    assert_eq!(parts.len(), 3, "{v}");
    assert!(parts.iter().all(|p| p.parse::<u64>().is_ok()), "{v}");
}

#[test]
fn usage_errors_exit_with_one() {
    for args in [
        &["evaluate"][..],
        &["evaluate", "--episodes", "3"],
        &["train"],
        &["export", "--checkpoint", "x.tfz"],
        &["frobnicate"],
        &["version", "--loud"],
        &["evaluate", "--checkpoint", "a.tfz", "--opponent", "nobody"],
        &[],
    ] {
        let out = tempfuser(args);
        assert_eq!(code(&out), 1, "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.tfz");
    let out = tempfuser(&["evaluate", "--checkpoint", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"network": {"d": 10, "heads": 4}}"#).unwrap();
    let out = tempfuser(&["train", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("divisible"));
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("run");
    let cfg = serde_json::json!({
        "seed": 3,
        "network": {"d": 8, "layers": 1, "heads": 2, "mlp_ratio": 2, "n_s": 2, "n_l": 2, "stride": 2},
        "trainer": {"batch_size": 8, "learning_starts": 8},
        "env": {"dogfight": {"max_steps": 40}},
        "schedule": {"total_env_steps": 80, "eval_interval": 1, "eval_episodes": 1, "out_dir": out}
    });
    let path = dir.join("run.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn train_evaluate_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = tempfuser(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("run");
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("episode,env_steps,eval_damage_ratio,eval_win_rate"));
    assert_eq!(metrics.lines().count(), 3);

    let resumed = tempfuser(&["train", "--resume", run.to_str().unwrap(), "--episodes", "1"]);
    assert_eq!(code(&resumed), 0, "{}", String::from_utf8_lossy(&resumed.stderr));
    assert_eq!(
        std::fs::read_to_string(run.join("metrics.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );

    let ckpt = run.join("actor.tfz");
    let eval = tempfuser(&[
        "evaluate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--opponent",
        "level_cruise",
        "--episodes",
        "2",
        "--seed",
        "4",
    ]);
    assert_eq!(code(&eval), 0, "{}", String::from_utf8_lossy(&eval.stderr));
    assert!(String::from_utf8(eval.stdout).unwrap().contains("win "));

    let traces = dir.path().join("traces");
    let export = tempfuser(&[
        "export",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        traces.to_str().unwrap(),
        "--episodes",
        "2",
    ]);
    assert_eq!(code(&export), 0, "{}", String::from_utf8_lossy(&export.stderr));
    assert!(traces.join("manifest.json").exists());
    assert!(traces.join("episode_001.jsonl").exists());
}

#[test]
fn corrupt_checkpoint_reports_a_load_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    assert_eq!(code(&tempfuser(&["train", "--config", cfg.to_str().unwrap()])), 0);
    let ckpt = dir.path().join("run").join("actor.tfz");
    let bytes = std::fs::read(&ckpt).unwrap();
    std::fs::write(&ckpt, &bytes[..bytes.len() - 7]).unwrap();
    let out = tempfuser(&["evaluate", "--checkpoint", ckpt.to_str().unwrap(), "--episodes", "1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("checkpoint"));
}
