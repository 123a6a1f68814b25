//! Environments the trainer can drive: the dogfight and a heading-hold toy.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tempfuser_sim::dynamics::{step_dynamics, trimmed_state};
use tempfuser_sim::geometry::wrap_pi;
use tempfuser_sim::{
    build_state, AircraftState, Airframe, ControlCommand, Engagement, EpisodeConfig, StateVector, StepReport,
    Termination, FPS_PER_KT,
};

use crate::error::{CoreError, Result};

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub state: StateVector,
    pub reward: f64,
    /// Terminal for bootstrapping purposes (timeouts are not).
    pub done: bool,
    /// The episode is over, for any reason.
    pub finished: bool,
}

pub trait Environment {
    /// Starts a new episode. The spawn state is not returned: trajectories
    /// hold post-step states only.
    fn reset(&mut self, seed: u64) -> Result<()>;

    fn step(&mut self, action: &ControlCommand) -> Result<EnvStep>;
}

/// The one-on-one engagement of the simulator.
#[derive(Debug, Clone)]
pub struct DogfightEnv {
    config: EpisodeConfig,
    engagement: Option<Engagement>,
    last: Option<StepReport>,
}

impl DogfightEnv {
    pub fn new(config: EpisodeConfig) -> Self {
        Self {
            config,
            engagement: None,
            last: None,
        }
    }

    pub fn engagement(&self) -> Option<&Engagement> {
        self.engagement.as_ref()
    }

    pub fn last_report(&self) -> Option<&StepReport> {
        self.last.as_ref()
    }
}

impl Environment for DogfightEnv {
    fn reset(&mut self, seed: u64) -> Result<()> {
        let config = EpisodeConfig {
            seed,
            ..self.config.clone()
        };
        self.engagement = Some(Engagement::new(config));
        self.last = None;
        Ok(())
    }

    fn step(&mut self, action: &ControlCommand) -> Result<EnvStep> {
        let eng = self
            .engagement
            .as_mut()
            .ok_or_else(|| CoreError::Contract("step before reset".into()))?;
        let cmd = action.clamped();
        let report = eng.step(&cmd)?;
        let state = build_state(eng.own(), eng.oppo(), &cmd)?;
        let mut reward = report.reward.total;
        if report.termination == Termination::CrashOwn {
            reward -= self.config.reward.crash_penalty;
        }
        let out = EnvStep {
            state,
            reward,
            done: report.termination.is_done(),
            finished: report.termination.is_terminal(),
        };
        self.last = Some(report);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadingHoldConfig {
    pub max_steps: usize,
    pub step_rate_hz: f64,
    pub altitude_ft: f64,
    pub speed_kt: f64,
    /// Target heading is drawn uniformly within ± this of the spawn heading.
    pub heading_offset_deg: f64,
    /// Target altitude is drawn uniformly within ± this of the spawn altitude.
    pub altitude_offset_ft: f64,
    pub z_min: f64,
    pub crash_penalty: f64,
    /// Distance ahead of the aircraft at which the virtual target is placed.
    pub lead_ft: f64,
    pub airframe: Airframe,
}

impl Default for HeadingHoldConfig {
    fn default() -> Self {
        Self {
            max_steps: 300,
            step_rate_hz: 10.0,
            altitude_ft: 15_000.0,
            speed_kt: 500.0,
            heading_offset_deg: 90.0,
            altitude_offset_ft: 2000.0,
            z_min: 250.0,
            crash_penalty: 10.0,
            lead_ft: 20_000.0,
            airframe: Airframe::default(),
        }
    }
}

impl HeadingHoldConfig {
    pub fn validate(&self, warm_up: usize) -> Result<()> {
        if self.max_steps <= warm_up {
            return Err(CoreError::Config(format!(
                "max_steps ({}) must exceed the warm-up length ({warm_up})",
                self.max_steps
            )));
        }
        if !(self.step_rate_hz > 0.0 && self.altitude_offset_ft > 0.0 && self.lead_ft > 0.0) {
            return Err(CoreError::Config(
                "heading-hold rates and distances must be positive".into(),
            ));
        }
        Ok(self.airframe.validate()?)
    }
}

/// Single-aircraft toy task: turn to and hold a target heading and altitude.
///
/// The target is presented as a virtual aircraft flying the target heading
/// `lead_ft` ahead at the target altitude, so observations share the
/// dogfight's 33-feature layout. Reward per step is
/// `−|Δψ|/π − ½·min(|Δz| / altitude_offset, 1)`, in `[−1.5, 0]`.
#[derive(Debug, Clone)]
pub struct HeadingHoldEnv {
    config: HeadingHoldConfig,
    own: Option<AircraftState>,
    heading: f64,
    altitude: f64,
    step: usize,
}

impl HeadingHoldEnv {
    pub fn new(config: HeadingHoldConfig) -> Self {
        Self {
            config,
            own: None,
            heading: 0.0,
            altitude: 0.0,
            step: 0,
        }
    }

    pub fn own(&self) -> Option<&AircraftState> {
        self.own.as_ref()
    }

    /// `(heading, altitude)` being tracked, rad and ft.
    pub fn target(&self) -> (f64, f64) {
        (self.heading, self.altitude)
    }

    fn virtual_target(&self, own: &AircraftState) -> AircraftState {
        let (s, c) = self.heading.sin_cos();
        let pos = Vector3::new(
            own.position.x + self.config.lead_ft * c,
            own.position.y + self.config.lead_ft * s,
            self.altitude,
        );
        AircraftState::level(pos, own.airspeed(), self.heading, 0.0, &self.config.airframe)
    }

    pub fn reward(&self, own: &AircraftState) -> f64 {
        let (_, _, psi) = own.euler();
        let dpsi = wrap_pi(self.heading - psi).abs();
        let dz = ((own.altitude() - self.altitude).abs() / self.config.altitude_offset_ft).min(1.0);
        -dpsi / std::f64::consts::PI - 0.5 * dz
    }
}

impl Environment for HeadingHoldEnv {
    fn reset(&mut self, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = &self.config;
        let (own, _) = trimmed_state(
            &c.airframe,
            Vector3::new(0.0, 0.0, c.altitude_ft),
            c.speed_kt * FPS_PER_KT,
            0.0,
        )?;
        let dh = c.heading_offset_deg.to_radians();
        self.heading = if dh > 0.0 { rng.gen_range(-dh..=dh) } else { 0.0 };
        self.altitude = c.altitude_ft + rng.gen_range(-c.altitude_offset_ft..=c.altitude_offset_ft);
        self.own = Some(own);
        self.step = 0;
        Ok(())
    }

    fn step(&mut self, action: &ControlCommand) -> Result<EnvStep> {
        let own = self
            .own
            .as_ref()
            .ok_or_else(|| CoreError::Contract("step before reset".into()))?;
        if self.step >= self.config.max_steps {
            return Err(CoreError::Contract("step called on a finished episode".into()));
        }
        let cmd = action.clamped();
        let next = step_dynamics(own, &cmd, 1.0 / self.config.step_rate_hz, &self.config.airframe)?;
        self.step += 1;
        let crashed = next.altitude() < self.config.z_min;
        let reward = if crashed {
            -self.config.crash_penalty
        } else {
            self.reward(&next)
        };
        let state = build_state(&next, &self.virtual_target(&next), &cmd)?;
        self.own = Some(next);
        Ok(EnvStep {
            state,
            reward,
            done: crashed,
            finished: crashed || self.step >= self.config.max_steps,
        })
    }
}
