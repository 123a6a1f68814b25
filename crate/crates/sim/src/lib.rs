//! A desk-scale air-combat simulator for one-on-one within-visual-range
//! engagements.
//!
//! The crate covers the environment half of the TempFuser training setup:
//! combat geometry and WEZ tests, a pseudo-6-DOF airframe, scripted
//! opponents, episode bookkeeping, the 33-feature normalized state with its
//! long/short trajectory views, and the seven-term reward.
//!
//! Interface frame is X north, Y east, Z up (feet, seconds); angles are
//! degrees at the interface and radians internally.

mod error;

pub mod airframe;
pub mod autopilot;
pub mod dynamics;
pub mod engagement;
pub mod geometry;
pub mod history;
pub mod opponent;
pub mod reward;
pub mod state;
pub mod trace;

pub use airframe::Airframe;
pub use dynamics::{step_dynamics, AircraftState, ControlCommand};
pub use engagement::{Engagement, EpisodeConfig, Mode, StepReport, Termination};
pub use error::{Result, SimError};
pub use geometry::{angles, los_vector, wez_contains, GeometrySnapshot, Pose};
pub use history::HistoryBuffer;
pub use opponent::{OpponentController, OpponentPolicy};
pub use reward::{RewardBreakdown, RewardConfig, RewardInputs};
pub use state::{build_state, StateVector, STATE_DIM};

/// Standard gravity, ft/s².
pub const G: f64 = 32.174;
/// Feet per second in one knot.
pub const FPS_PER_KT: f64 = 1.687_809_857_101_196;
/// Specific energy E = z + v²/(2g), feet.
pub fn specific_energy(altitude_ft: f64, speed_fps: f64) -> f64 {
    altitude_ft + speed_fps * speed_fps / (2.0 * G)
}
