//! TempFuser: a long/short-term temporal-fusion actor trained with soft
//! actor-critic in the `tempfuser-sim` engagement.
//!
//! The actor encodes a long, strided trajectory and a short, dense one with
//! separate LSTM pipelines, fuses the two embeddings with a class token in a
//! small transformer encoder and emits a tanh-squashed Gaussian over the four
//! control channels. [`train::Trainer`] runs the training loop and
//! [`eval::evaluate`] scores a pilot against a scripted opponent.

pub mod checkpoint;
pub mod config;
pub mod critic;
pub mod env;
mod error;
pub mod eval;
pub mod gradsuite;
pub mod layers;
pub mod policy;
pub mod replay;
pub mod sac;
pub mod train;

pub use config::{ActorArch, EnvConfig, NetworkConfig, RunConfig, ScheduleConfig, TrainerConfig};
pub use critic::Critic;
pub use env::{DogfightEnv, EnvStep, Environment, HeadingHoldConfig, HeadingHoldEnv};
pub use error::{CoreError, Result};
pub use eval::{evaluate, EvalReport, Pilot};
pub use policy::{ActionDistribution, Actor, ACTION_DIM};
pub use replay::Replay;
pub use sac::Agent;
pub use train::{MetricsRow, Trainer};
