//! Evaluation reports and trace export through the public API.

use std::io::BufRead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfuser_core::checkpoint::{load_actor, save_actor, CheckpointMeta};
use tempfuser_core::eval::{evaluate, export_trajectories, Manifest, Pilot, TraceHeader};
use tempfuser_core::{Actor, ActorArch, CoreError, NetworkConfig, RunConfig};
use tempfuser_sim::trace::TraceRecord;
use tempfuser_sim::{EpisodeConfig, OpponentPolicy, Termination};

fn net() -> NetworkConfig {
    NetworkConfig {
        arch: ActorArch::TempFuser,
        d: 8,
        layers: 1,
        heads: 2,
        mlp_ratio: 2,
        n_s: 4,
        n_l: 4,
        stride: 4,
    }
}

fn short_episodes() -> EpisodeConfig {
    EpisodeConfig {
        max_steps: 150,
        ..EpisodeConfig::default()
    }
}

fn actor() -> Actor {
    Actor::new(&net(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap()
}

fn assert_simplex(r: &tempfuser_core::EvalReport) {
    assert!((r.win_pct + r.lose_pct + r.draw_pct - 100.0).abs() < 1e-9);
    assert!((0.0..=100.0).contains(&r.damage_pct));
    assert!((0.0..=100.0).contains(&r.life_pct));
}

#[test]
fn evaluation_is_repeatable() {
    let a = actor();
    let run = || {
        evaluate(
            Pilot::Policy(&a),
            &net(),
            &short_episodes(),
            OpponentPolicy::PurePursuit,
            4,
            11,
        )
        .unwrap()
    };
    let (r1, r2) = (run(), run());
    assert_eq!(r1, r2);
    assert_simplex(&r1);
    assert_eq!(r1.rows.len(), 4);
    assert_eq!(r1.rows[2].seed, 13);
}

#[test]
fn scripted_baselines_are_evaluated_by_the_same_harness() {
    for policy in [OpponentPolicy::LevelCruise, OpponentPolicy::PurePursuit] {
        let r = evaluate(
            Pilot::Scripted(policy),
            &net(),
            &short_episodes(),
            OpponentPolicy::PurePursuit,
            3,
            0,
        )
        .unwrap();
        assert_simplex(&r);
        for row in &r.rows {
            assert_ne!(row.termination, Termination::None);
        }
    }
}

#[test]
fn zero_episodes_is_rejected() {
    let a = actor();
    assert!(evaluate(
        Pilot::Policy(&a),
        &net(),
        &short_episodes(),
        OpponentPolicy::Random,
        0,
        0
    )
    .is_err());
}

#[test]
fn export_writes_one_parseable_trace_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    let a = actor();
    let manifest = export_trajectories(
        Pilot::Policy(&a),
        &net(),
        &short_episodes(),
        OpponentPolicy::EvasiveWeave,
        3,
        5,
        dir.path(),
    )
    .unwrap();
    let on_disk: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk, manifest);
    assert_eq!(manifest.episodes.len(), 3);
    for (i, entry) in manifest.episodes.iter().enumerate() {
        assert_eq!(entry.file, format!("episode_{i:03}.jsonl"));
        let file = std::fs::File::open(dir.path().join(&entry.file)).unwrap();
        let lines: Vec<String> = std::io::BufReader::new(file).lines().map(Result::unwrap).collect();
        assert_eq!(lines.len(), entry.steps + 1);
        let header: TraceHeader = serde_json::from_str(&lines[0]).unwrap();
        assert_eq!(
            (header.episode, header.seed, header.warm_up_steps),
            (i, 5 + i as u64, 16)
        );
        for line in &lines[1..] {
            serde_json::from_str::<TraceRecord>(line).unwrap();
        }
    }
}

#[test]
fn re_export_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = actor();
    let export = |sub: &str| {
        let out = dir.path().join(sub);
        export_trajectories(
            Pilot::Policy(&a),
            &net(),
            &short_episodes(),
            OpponentPolicy::Random,
            2,
            9,
            &out,
        )
        .unwrap();
        out
    };
    let (x, y) = (export("x"), export("y"));
    for name in ["episode_000.jsonl", "episode_001.jsonl", "manifest.json"] {
        assert_eq!(
            std::fs::read(x.join(name)).unwrap(),
            std::fs::read(y.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn failed_export_removes_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    // a directory where the second trace should go makes its creation fail
    std::fs::create_dir(dir.path().join("episode_001.jsonl")).unwrap();
    let a = actor();
    let err = export_trajectories(
        Pilot::Policy(&a),
        &net(),
        &short_episodes(),
        OpponentPolicy::PurePursuit,
        3,
        0,
        dir.path(),
    )
    .unwrap_err();
    assert!(matches!(err, CoreError::Io { .. }), "{err}");
    assert!(!dir.path().join("episode_000.jsonl").exists());
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn reloaded_checkpoints_evaluate_repeatably() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("actor.tfz");
    let a = actor();
    let meta = CheckpointMeta {
        network: net(),
        episode: 1,
        env_steps: 2,
        episode_config: Some(short_episodes()),
    };
    save_actor(&path, &a, &meta).unwrap();
    let (b, m) = load_actor(&path).unwrap();
    let base = m.episode_config.unwrap();
    let r = evaluate(Pilot::Policy(&b), &m.network, &base, OpponentPolicy::LagPursuit, 2, 0).unwrap();
    assert_simplex(&r);
    let again = evaluate(
        Pilot::Policy(&load_actor(&path).unwrap().0),
        &m.network,
        &base,
        OpponentPolicy::LagPursuit,
        2,
        0,
    )
    .unwrap();
    assert_eq!(r, again);
}

#[test]
fn malformed_run_configs_are_rejected() {
    for bad in [
        r#"{"network": {"d": 10, "heads": 4}}"#,
        r#"{"network": {"n_s": 0}}"#,
        r#"{"trainer": {"gamma": 1.5}}"#,
        r#"{"trainer": {"tau": 0}}"#,
        r#"{"schedule": {"eval_interval": 0}}"#,
        r#"{"env": {"dogfight": {"max_steps": 10}}}"#,
        r#"{"env": {"heading_hold": {"max_steps": 64}}}"#,
        r#"{"env": {"maze": {}}}"#,
        r#"{"network": {"arch": "gru"}}"#,
    ] {
        assert!(RunConfig::from_json(bad).is_err(), "{bad}");
    }
}
