//! The training loop: episodes, updates, periodic evaluation, checkpoints
//! and resumable snapshots.
//!
//! Output directory layout:
//!
//! ```text
//! config.json               the run configuration
//! metrics.csv               one row per evaluation pass
//! actor.tfz / actor.json    latest actor checkpoint
//! checkpoints/actor_eNNNNNN.tfz (+ .json)
//! state.json, snapshot.tfz  everything needed to resume
//! ```

use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tempfuser_nd::checkpoint::{self, Precision};
use tempfuser_sim::{EpisodeConfig, Mode};

use crate::checkpoint::{save_actor, write_atomic, CheckpointMeta};
use crate::config::{EnvConfig, RunConfig};
use crate::env::{DogfightEnv, Environment, HeadingHoldEnv};
use crate::error::{io_err, CoreError, Result};
use crate::eval::{self, EvalReport, Pilot};
use crate::replay::Replay;
use crate::sac::{rollout_episode, Agent, EpisodeStats, UpdateStats};

pub const METRICS_FILE: &str = "metrics.csv";
pub const STATE_FILE: &str = "state.json";
pub const SNAPSHOT_FILE: &str = "snapshot.tfz";

/// One evaluation pass. Dogfight-only columns are NaN for other tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: u64,
    pub env_steps: u64,
    pub eval_damage_ratio: f64,
    pub eval_win_rate: f64,
    /// Mean undiscounted return of the evaluation episodes.
    pub eval_return: f64,
    /// Mean training-episode return since the previous row.
    pub mean_reward: f64,
    pub alpha: f64,
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub pi_loss: f64,
}

/// Running means of update statistics and training returns between rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Accumulator {
    episodes: u64,
    reward: f64,
    updates: u64,
    q1: f64,
    q2: f64,
    pi: f64,
}

impl Accumulator {
    fn add_update(&mut self, s: &UpdateStats) {
        self.updates += 1;
        self.q1 += s.q1_loss;
        self.q2 += s.q2_loss;
        self.pi += s.pi_loss;
    }

    fn mean(sum: f64, n: u64) -> f64 {
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RngState {
    seed: [u8; 32],
    stream: u64,
    /// Decimal, since JSON numbers cannot hold every u128.
    word_pos: String,
}

impl RngState {
    fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    fn restore(&self) -> Result<ChaCha8Rng> {
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|_| CoreError::Checkpoint(format!("bad rng position {:?}", self.word_pos)))?;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainerState {
    config: RunConfig,
    episode: u64,
    env_steps: u64,
    updates: u64,
    faults: u64,
    rng: RngState,
    acc: Accumulator,
}

/// Seed for training episode `episode` of a run seeded with `seed`.
pub fn episode_seed(seed: u64, episode: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode.wrapping_add(1));
    rng.next_u64()
}

/// Seeds of the fixed evaluation set, shared by every pass of a run.
pub fn eval_seed(seed: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng.next_u64() >> 16
}

pub struct Trainer {
    cfg: RunConfig,
    agent: Agent,
    replay: Replay,
    rng: ChaCha8Rng,
    episode: u64,
    env_steps: u64,
    updates: u64,
    faults: u64,
    acc: Accumulator,
    last_alpha: f64,
}

impl Trainer {
    /// Starts a fresh run, creating the output directory.
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let mut init = ChaCha8Rng::seed_from_u64(cfg.seed);
        let agent = Agent::new(&cfg.network, &cfg.trainer, &mut init)?;
        let replay = Replay::new(cfg.trainer.replay_capacity, &cfg.network);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        let out = &cfg.schedule.out_dir;
        std::fs::create_dir_all(out).map_err(io_err(out))?;
        write_atomic(&out.join("config.json"), serde_json::to_string_pretty(&cfg)?.as_bytes())?;
        let metrics = out.join(METRICS_FILE);
        if metrics.exists() {
            std::fs::remove_file(&metrics).map_err(io_err(&metrics))?;
        }
        let last_alpha = agent.alpha();
        Ok(Self {
            cfg,
            agent,
            replay,
            rng,
            episode: 0,
            env_steps: 0,
            updates: 0,
            faults: 0,
            acc: Accumulator::default(),
            last_alpha,
        })
    }

    /// Continues the run saved in `out_dir`. Metrics rows written after the
    /// snapshot are dropped so the log matches the restored state.
    pub fn resume(out_dir: &Path) -> Result<Self> {
        let state_path = out_dir.join(STATE_FILE);
        let text = std::fs::read_to_string(&state_path).map_err(io_err(&state_path))?;
        let state: TrainerState = serde_json::from_str(&text)?;
        let mut cfg = state.config;
        cfg.schedule.out_dir = out_dir.to_path_buf();
        cfg.validate()?;
        let snap = out_dir.join(SNAPSHOT_FILE);
        let entries = checkpoint::load(&snap).map_err(|e| CoreError::Checkpoint(format!("{}: {e}", snap.display())))?;
        let mut agent = Agent::new(&cfg.network, &cfg.trainer, &mut ChaCha8Rng::seed_from_u64(0))?;
        agent.load_tensors(&entries)?;
        let mut replay = Replay::new(cfg.trainer.replay_capacity, &cfg.network);
        replay.load_tensors(&entries)?;
        let rows: Vec<MetricsRow> = read_metrics(&out_dir.join(METRICS_FILE))?
            .into_iter()
            .filter(|r| r.episode <= state.episode)
            .collect();
        write_metrics(&out_dir.join(METRICS_FILE), &rows)?;
        let last_alpha = agent.alpha();
        Ok(Self {
            cfg,
            agent,
            replay,
            rng: state.rng.restore()?,
            episode: state.episode,
            env_steps: state.env_steps,
            updates: state.updates,
            faults: state.faults,
            acc: state.acc,
            last_alpha,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn replay(&self) -> &Replay {
        &self.replay
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Episodes discarded after a simulator fault.
    pub fn faults(&self) -> u64 {
        self.faults
    }

    fn out_dir(&self) -> &Path {
        &self.cfg.schedule.out_dir
    }

    fn training_env(&self) -> Box<dyn Environment> {
        match &self.cfg.env {
            EnvConfig::Dogfight(ep) => Box::new(DogfightEnv::new(EpisodeConfig {
                mode: Mode::Training,
                ..ep.clone()
            })),
            EnvConfig::HeadingHold(hh) => Box::new(HeadingHoldEnv::new(hh.clone())),
        }
    }

    /// Collects one episode and runs its share of gradient updates. Every
    /// `eval_interval` episodes this also evaluates, logs, checkpoints and
    /// snapshots; the new metrics row is returned then.
    pub fn run_episode(&mut self) -> Result<Option<MetricsRow>> {
        let mut env = self.training_env();
        let seed = episode_seed(self.cfg.seed, self.episode);
        let stats: EpisodeStats =
            rollout_episode(env.as_mut(), &self.agent.actor, seed, &mut self.replay, &mut self.rng)?;
        self.episode += 1;
        self.env_steps += stats.env_steps as u64;
        if stats.fault.is_some() {
            self.faults += 1;
        } else {
            self.acc.episodes += 1;
            self.acc.reward += stats.total_reward;
        }
        let tc = &self.cfg.trainer;
        let n = tc
            .updates_per_episode
            .unwrap_or_else(|| (stats.records as f64 * tc.update_ratio).round() as usize);
        if self.replay.len() >= tc.learning_starts.max(1) {
            let batch_size = tc.batch_size;
            for _ in 0..n {
                let batch = self.replay.sample(batch_size, &mut self.rng)?;
                let s = self.agent.update(&batch, &mut self.rng)?;
                self.acc.add_update(&s);
                self.last_alpha = s.alpha;
                self.updates += 1;
            }
        }
        if self.episode.is_multiple_of(self.cfg.schedule.eval_interval) {
            let row = self.checkpoint_pass()?;
            return Ok(Some(row));
        }
        Ok(None)
    }

    /// Trains until `total_env_steps` is reached, reporting each metrics row.
    /// The final agent always gets an evaluation pass and a checkpoint, even
    /// when the last episode falls between scheduled passes.
    pub fn run(&mut self, mut progress: impl FnMut(&MetricsRow)) -> Result<()> {
        let mut pending = false;
        while self.env_steps < self.cfg.schedule.total_env_steps {
            match self.run_episode()? {
                Some(row) => {
                    progress(&row);
                    pending = false;
                }
                None => pending = true,
            }
        }
        if pending {
            progress(&self.checkpoint_pass()?);
        }
        Ok(())
    }

    /// Runs exactly `n` more episodes regardless of the step budget.
    pub fn run_episodes(&mut self, n: u64, mut progress: impl FnMut(&MetricsRow)) -> Result<()> {
        for _ in 0..n {
            if let Some(row) = self.run_episode()? {
                progress(&row);
            }
        }
        Ok(())
    }

    /// Deterministic evaluation of the current actor on the fixed seed set.
    /// Returns the dogfight report, if the task is a dogfight, and the mean
    /// evaluation return.
    pub fn evaluate(&self) -> Result<(Option<EvalReport>, f64)> {
        let s = &self.cfg.schedule;
        let seed = eval_seed(self.cfg.seed);
        match &self.cfg.env {
            EnvConfig::Dogfight(ep) => {
                let opponent = s.eval_opponent.unwrap_or(ep.opponent);
                let report = eval::evaluate(
                    Pilot::Policy(&self.agent.actor),
                    &self.cfg.network,
                    ep,
                    opponent,
                    s.eval_episodes,
                    seed,
                )?;
                let ret = report.rows.iter().map(|r| r.total_reward).sum::<f64>() / report.rows.len() as f64;
                Ok((Some(report), ret))
            }
            EnvConfig::HeadingHold(hh) => {
                let seeds: Vec<u64> = (0..s.eval_episodes as u64).map(|i| seed.wrapping_add(i)).collect();
                let mut env = HeadingHoldEnv::new(hh.clone());
                Ok((None, eval::mean_return(&mut env, &self.agent.actor, &seeds)?))
            }
        }
    }

    fn checkpoint_pass(&mut self) -> Result<MetricsRow> {
        let (report, eval_return) = self.evaluate()?;
        let acc = std::mem::take(&mut self.acc);
        let row = MetricsRow {
            episode: self.episode,
            env_steps: self.env_steps,
            eval_damage_ratio: report.as_ref().map_or(f64::NAN, |r| r.damage_pct / 100.0),
            eval_win_rate: report.as_ref().map_or(f64::NAN, |r| r.win_pct / 100.0),
            eval_return,
            mean_reward: Accumulator::mean(acc.reward, acc.episodes),
            alpha: self.last_alpha,
            q1_loss: Accumulator::mean(acc.q1, acc.updates),
            q2_loss: Accumulator::mean(acc.q2, acc.updates),
            pi_loss: Accumulator::mean(acc.pi, acc.updates),
        };
        let metrics = self.out_dir().join(METRICS_FILE);
        let mut rows = read_metrics(&metrics)?;
        rows.push(row.clone());
        write_metrics(&metrics, &rows)?;
        self.save_actor_checkpoints()?;
        self.save_snapshot()?;
        Ok(row)
    }

    fn save_actor_checkpoints(&self) -> Result<()> {
        let meta = CheckpointMeta {
            network: self.cfg.network.clone(),
            episode: self.episode,
            env_steps: self.env_steps,
            episode_config: match &self.cfg.env {
                EnvConfig::Dogfight(ep) => Some(ep.clone()),
                EnvConfig::HeadingHold(_) => None,
            },
        };
        let out = self.out_dir();
        save_actor(&out.join("actor.tfz"), &self.agent.actor, &meta)?;
        let dir = out.join("checkpoints");
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        save_actor(
            &dir.join(format!("actor_e{:06}.tfz", self.episode)),
            &self.agent.actor,
            &meta,
        )
    }

    /// Writes the resumable snapshot: weights and optimizer moments at full
    /// precision, the replay contents, counters and the RNG position.
    pub fn save_snapshot(&self) -> Result<()> {
        let out = self.out_dir();
        let mut entries = self.agent.to_tensors();
        entries.extend(self.replay.to_tensors());
        let bytes = checkpoint::encode(entries.iter().map(|(n, t)| (n.as_str(), t)), Precision::F64);
        write_atomic(&out.join(SNAPSHOT_FILE), &bytes)?;
        let state = TrainerState {
            config: self.cfg.clone(),
            episode: self.episode,
            env_steps: self.env_steps,
            updates: self.updates,
            faults: self.faults,
            rng: RngState::capture(&self.rng),
            acc: self.acc.clone(),
        };
        write_atomic(&out.join(STATE_FILE), serde_json::to_string_pretty(&state)?.as_bytes())
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.out_dir().join(METRICS_FILE)
    }
}

/// Reads a metrics log; a missing file is an empty log.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_path(path)?;
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
    Ok(rows)
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "episode",
            "env_steps",
            "eval_damage_ratio",
            "eval_win_rate",
            "eval_return",
            "mean_reward",
            "alpha",
            "q1_loss",
            "q2_loss",
            "pi_loss",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CoreError::Contract(e.to_string()))?;
    write_atomic(path, &bytes)
}
