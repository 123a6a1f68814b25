//! Run configuration: one JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tempfuser_sim::{EpisodeConfig, OpponentPolicy, STATE_DIM};

use crate::env::HeadingHoldConfig;
use crate::error::{io_err, CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorArch {
    /// Long and short LSTM pipelines fused by a transformer encoder.
    TempFuser,
    /// Long and short LSTM pipelines, terminal states concatenated.
    LsLstm,
    /// Short pipeline only.
    Lstm,
}

impl ActorArch {
    pub fn name(self) -> &'static str {
        match self {
            Self::TempFuser => "temp_fuser",
            Self::LsLstm => "ls_lstm",
            Self::Lstm => "lstm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub arch: ActorArch,
    /// Model width.
    pub d: usize,
    /// Encoder blocks.
    pub layers: usize,
    pub heads: usize,
    /// Hidden width of the encoder MLP as a multiple of `d`.
    pub mlp_ratio: usize,
    /// Rows of the dense short trajectory.
    pub n_s: usize,
    /// Rows of the sparse long trajectory.
    pub n_l: usize,
    /// Spacing of the long trajectory, in steps.
    pub stride: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            arch: ActorArch::TempFuser,
            d: 128,
            layers: 3,
            heads: 4,
            mlp_ratio: 4,
            n_s: 8,
            n_l: 8,
            stride: 8,
        }
    }
}

impl NetworkConfig {
    pub const INPUT_DIM: usize = STATE_DIM;

    /// Sequence length seen by the encoder: class token, long rows, short rows.
    pub fn tokens(&self) -> usize {
        self.n_l + self.n_s + 1
    }

    /// Steps flown with the initial action before the policy takes over.
    pub fn warm_up(&self) -> usize {
        self.n_l * self.stride
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.heads == 0 || self.mlp_ratio == 0 {
            return Err(CoreError::Config("d, heads and mlp_ratio must be positive".into()));
        }
        if !self.d.is_multiple_of(self.heads) {
            return Err(CoreError::Config(format!(
                "d = {} is not divisible by heads = {}",
                self.d, self.heads
            )));
        }
        if self.n_s == 0 || self.n_l == 0 || self.stride == 0 {
            return Err(CoreError::Config(
                "trajectory lengths and stride must be positive".into(),
            ));
        }
        if self.n_s > self.warm_up() {
            return Err(CoreError::Config(format!(
                "n_s = {} exceeds the history capacity n_l * stride = {}",
                self.n_s,
                self.warm_up()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub tau: f64,
    pub lr_q: f64,
    pub lr_pi: f64,
    pub lr_alpha: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Gradient steps after each episode. `None` means one per step collected.
    pub updates_per_episode: Option<usize>,
    /// Scales the default of one update per collected step.
    pub update_ratio: f64,
    /// Replay size below which no updates run.
    pub learning_starts: usize,
    /// Defaults to minus the action dimension.
    pub target_entropy: Option<f64>,
    pub init_alpha: f64,
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            lr_q: 3e-4,
            lr_pi: 3e-4,
            lr_alpha: 3e-4,
            batch_size: 256,
            replay_capacity: 1_000_000,
            updates_per_episode: None,
            update_ratio: 1.0,
            learning_starts: 256,
            target_entropy: None,
            init_alpha: 1.0,
            max_grad_norm: None,
        }
    }
}

impl TrainerConfig {
    pub fn target_entropy(&self) -> f64 {
        self.target_entropy
            .unwrap_or(-(tempfuser_sim::state::ACTION_DIM as f64))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(CoreError::Config(format!("tau = {} must lie in (0, 1]", self.tau)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(CoreError::Config(format!("gamma = {} must lie in (0, 1)", self.gamma)));
        }
        if self.batch_size == 0 || self.replay_capacity == 0 {
            return Err(CoreError::Config(
                "batch_size and replay_capacity must be positive".into(),
            ));
        }
        if !(self.init_alpha > 0.0) {
            return Err(CoreError::Config("init_alpha must be positive".into()));
        }
        if !(self.update_ratio >= 0.0) {
            return Err(CoreError::Config("update_ratio must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvConfig {
    Dogfight(EpisodeConfig),
    HeadingHold(HeadingHoldConfig),
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::Dogfight(EpisodeConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    /// Training stops at the first episode boundary past this many steps.
    pub total_env_steps: u64,
    /// Episodes between evaluation passes.
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Opponent for evaluation; the training opponent when unset.
    pub eval_opponent: Option<OpponentPolicy>,
    pub out_dir: PathBuf,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            total_env_steps: 200_000,
            eval_interval: 10,
            eval_episodes: 10,
            eval_opponent: None,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub network: NetworkConfig,
    pub trainer: TrainerConfig,
    pub env: EnvConfig,
    pub schedule: ScheduleConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.trainer.validate()?;
        if self.schedule.eval_interval == 0 || self.schedule.eval_episodes == 0 {
            return Err(CoreError::Config(
                "eval_interval and eval_episodes must be positive".into(),
            ));
        }
        match &self.env {
            EnvConfig::Dogfight(ep) => ep.validate(self.network.warm_up())?,
            EnvConfig::HeadingHold(hh) => hh.validate(self.network.warm_up())?,
        }
        Ok(())
    }
}
