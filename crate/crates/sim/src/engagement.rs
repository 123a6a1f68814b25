//! One-on-one episodes: spawning, stepping both aircraft, damage and
//! termination.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::airframe::Airframe;
use crate::dynamics::{step_dynamics, AircraftState, ControlCommand};
use crate::error::{Result, SimError};
use crate::geometry::{angles_or_coincident, opponent_wez_contains, wez_contains, GeometrySnapshot};
use crate::opponent::{OpponentController, OpponentPolicy};
use crate::reward::{total_reward, RewardBreakdown, RewardConfig, RewardInputs};
use crate::state::normalized_vz;
use crate::FPS_PER_KT;

pub const FULL_LIFE: u8 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Training,
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpawnConfig {
    pub altitude_ft: f64,
    pub speed_kt: f64,
    /// Head-on separation in evaluation, ft.
    pub separation_ft: f64,
    /// Opponent altitude range in training, ft.
    pub oppo_altitude_ft: (f64, f64),
    /// Opponent horizontal spawn radius in training, ft.
    pub spawn_radius_ft: f64,
    /// Throttle fraction at spawn.
    pub throttle: f64,
}

impl Default for SpawnConfig {
    fn default() -> Self {
        Self {
            altitude_ft: 15_000.0,
            speed_kt: 500.0,
            separation_ft: 10_000.0,
            oppo_altitude_ft: (10_000.0, 18_000.0),
            spawn_radius_ft: 30_000.0,
            throttle: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    pub mode: Mode,
    pub max_steps: usize,
    pub step_rate_hz: f64,
    pub opponent: OpponentPolicy,
    pub seed: u64,
    pub spawn: SpawnConfig,
    pub own_airframe: Airframe,
    pub oppo_airframe: Airframe,
    pub reward: RewardConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Training,
            max_steps: 3000,
            step_rate_hz: 10.0,
            opponent: OpponentPolicy::PurePursuit,
            seed: 0,
            spawn: SpawnConfig::default(),
            own_airframe: Airframe::default(),
            oppo_airframe: Airframe::default(),
            reward: RewardConfig::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.step_rate_hz
    }

    /// `warm_up` is the number of scripted steps that precede the policy.
    pub fn validate(&self, warm_up: usize) -> Result<()> {
        if !(self.step_rate_hz.is_finite() && self.step_rate_hz > 0.0) {
            return Err(SimError::Config("step_rate_hz must be positive".into()));
        }
        if self.max_steps <= warm_up {
            return Err(SimError::Config(format!(
                "max_steps ({}) must exceed the warm-up length ({warm_up})",
                self.max_steps
            )));
        }
        let (lo, hi) = self.spawn.oppo_altitude_ft;
        if !(lo <= hi && lo > self.reward.z_min) {
            return Err(SimError::Config("opponent spawn altitude range is invalid".into()));
        }
        self.own_airframe.validate()?;
        self.oppo_airframe.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    None,
    OwnWin,
    OppoWin,
    CrashOwn,
    CrashOppo,
    Timeout,
    Draw,
}

impl Termination {
    pub fn is_terminal(self) -> bool {
        self != Termination::None
    }

    /// True when the environment itself ended the episode. A timeout only
    /// truncates it, so value targets keep bootstrapping.
    pub fn is_done(self) -> bool {
        !matches!(self, Termination::None | Termination::Timeout)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::OwnWin => "own_win",
            Self::OppoWin => "oppo_win",
            Self::CrashOwn => "crash_own",
            Self::CrashOppo => "crash_oppo",
            Self::Timeout => "timeout",
            Self::Draw => "draw",
        }
    }
}

/// Initial states for both aircraft.
pub fn spawn(config: &EpisodeConfig) -> (AircraftState, AircraftState) {
    let s = &config.spawn;
    let speed = s.speed_kt * FPS_PER_KT;
    let own_pos = Vector3::new(0.0, 0.0, s.altitude_ft);
    let own = AircraftState::level(own_pos, speed, 0.0, s.throttle, &config.own_airframe);
    let oppo = match config.mode {
        Mode::Evaluation => AircraftState::level(
            own_pos + Vector3::new(s.separation_ft, 0.0, 0.0),
            speed,
            std::f64::consts::PI,
            s.throttle,
            &config.oppo_airframe,
        ),
        Mode::Training => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            // uniform over the disk, not over the radius
            let r = s.spawn_radius_ft * rng.gen::<f64>().sqrt();
            let bearing = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let (lo, hi) = s.oppo_altitude_ft;
            let alt = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let pos = Vector3::new(r * bearing.cos(), r * bearing.sin(), alt);
            AircraftState::level(pos, speed, heading, s.throttle, &config.oppo_airframe)
        }
    };
    (own, oppo)
}

/// WEZ damage for this step and the resulting termination.
pub fn apply_damage_and_terminate(
    own: &mut AircraftState,
    oppo: &mut AircraftState,
    geometry: &GeometrySnapshot,
    step_index: usize,
    max_steps: usize,
    z_min: f64,
) -> (Termination, bool, bool) {
    let own_hit = wez_contains(geometry);
    let oppo_hit = opponent_wez_contains(geometry);
    if own_hit {
        oppo.life = oppo.life.saturating_sub(1);
    }
    if oppo_hit {
        own.life = own.life.saturating_sub(1);
    }
    let own_crash = own.altitude() < z_min;
    let oppo_crash = oppo.altitude() < z_min;
    let termination = match (own.life == 0, oppo.life == 0) {
        (true, true) => Termination::Draw,
        (false, true) => Termination::OwnWin,
        (true, false) => Termination::OppoWin,
        (false, false) => match (own_crash, oppo_crash) {
            (true, true) => Termination::Draw,
            (true, false) => Termination::CrashOwn,
            (false, true) => Termination::CrashOppo,
            (false, false) if step_index >= max_steps => Termination::Timeout,
            _ => Termination::None,
        },
    };
    (termination, own_hit, oppo_hit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub sim_time: f64,
    pub geometry: GeometrySnapshot,
    pub own_wez: bool,
    pub oppo_wez: bool,
    pub reward: RewardBreakdown,
    pub termination: Termination,
}

pub fn reward_inputs(own: &AircraftState, geometry: &GeometrySnapshot, own_wez: bool, oppo_wez: bool) -> RewardInputs {
    RewardInputs {
        deviation_deg: geometry.deviation,
        range_ft: geometry.range,
        horizontal_deg: geometry.horizontal,
        own_wez,
        oppo_wez,
        altitude_ft: own.altitude(),
        v_z: normalized_vz(own.vertical_speed()),
        alpha_deg: own.alpha_beta().0.to_degrees(),
        energy_ft: own.specific_energy(),
    }
}

/// A running episode against a scripted opponent.
#[derive(Debug, Clone)]
pub struct Engagement {
    config: EpisodeConfig,
    own: AircraftState,
    oppo: AircraftState,
    pilot: OpponentController,
    step: usize,
    termination: Termination,
}

impl Engagement {
    pub fn new(config: EpisodeConfig) -> Self {
        let (own, oppo) = spawn(&config);
        let pilot = OpponentController::new(config.opponent, config.seed ^ 0x5eed_0990);
        Self {
            config,
            own,
            oppo,
            pilot,
            step: 0,
            termination: Termination::None,
        }
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn own(&self) -> &AircraftState {
        &self.own
    }

    pub fn oppo(&self) -> &AircraftState {
        &self.oppo
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn geometry(&self) -> GeometrySnapshot {
        angles_or_coincident(&self.own.pose(), &self.oppo.pose())
    }

    pub fn step(&mut self, own_cmd: &ControlCommand) -> Result<StepReport> {
        if self.termination.is_terminal() {
            return Err(SimError::Contract("step called on a finished episode".into()));
        }
        let dt = self.config.dt();
        let oppo_cmd = self
            .pilot
            .command(&self.oppo, &self.own, &self.config.oppo_airframe, dt);
        let mut own = step_dynamics(&self.own, own_cmd, dt, &self.config.own_airframe)?;
        let mut oppo = step_dynamics(&self.oppo, &oppo_cmd, dt, &self.config.oppo_airframe)?;
        self.step += 1;

        let geometry = angles_or_coincident(&own.pose(), &oppo.pose());
        let (termination, own_wez, oppo_wez) = apply_damage_and_terminate(
            &mut own,
            &mut oppo,
            &geometry,
            self.step,
            self.config.max_steps,
            self.config.reward.z_min,
        );
        let reward = total_reward(&reward_inputs(&own, &geometry, own_wez, oppo_wez), &self.config.reward);
        self.own = own;
        self.oppo = oppo;
        self.termination = termination;
        Ok(StepReport {
            step: self.step,
            sim_time: self.step as f64 * dt,
            geometry,
            own_wez,
            oppo_wez,
            reward,
            termination,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angles;

    fn eval_config() -> EpisodeConfig {
        EpisodeConfig {
            mode: Mode::Evaluation,
            ..EpisodeConfig::default()
        }
    }

    #[test]
    fn evaluation_spawn_is_head_on() {
        let (own, oppo) = spawn(&eval_config());
        let g = angles(&own.pose(), &oppo.pose()).unwrap();
        assert!((g.range - 10_000.0).abs() < 1e-9);
        assert!(g.deviation.abs() < 1e-9);
        assert!(g.opponent_deviation().abs() < 1e-9);
        assert_eq!((own.life, oppo.life), (FULL_LIFE, FULL_LIFE));
        assert!((own.airspeed() / FPS_PER_KT - 500.0).abs() < 1e-9);
    }

    #[test]
    fn training_spawn_is_seeded() {
        let c = EpisodeConfig {
            seed: 17,
            ..EpisodeConfig::default()
        };
        assert_eq!(spawn(&c), spawn(&c));
    }

    fn pair_at(alt_own: f64) -> (AircraftState, AircraftState) {
        let af = Airframe::default();
        let own = AircraftState::level(Vector3::new(0.0, 0.0, alt_own), 800.0, 0.0, 0.5, &af);
        let oppo = AircraftState::level(Vector3::new(0.0, 9000.0, 15_000.0), 800.0, 0.0, 0.5, &af);
        (own, oppo)
    }

    #[test]
    fn last_life_point_ends_the_episode() {
        let (mut own, mut oppo) = pair_at(15_000.0);
        oppo.life = 1;
        let mut g = angles_or_coincident(&own.pose(), &oppo.pose());
        g.deviation = 0.0;
        g.range = 1000.0;
        let (t, hit, _) = apply_damage_and_terminate(&mut own, &mut oppo, &g, 5, 3000, 250.0);
        assert!(hit);
        assert_eq!(oppo.life, 0);
        assert_eq!(t, Termination::OwnWin);
    }

    #[test]
    fn low_altitude_is_a_crash() {
        let (mut own, mut oppo) = pair_at(249.0);
        let g = angles_or_coincident(&own.pose(), &oppo.pose());
        let (t, _, _) = apply_damage_and_terminate(&mut own, &mut oppo, &g, 5, 3000, 250.0);
        assert_eq!(t, Termination::CrashOwn);
    }

    #[test]
    fn quiet_step_changes_nothing() {
        let (mut own, mut oppo) = pair_at(15_000.0);
        let g = angles_or_coincident(&own.pose(), &oppo.pose());
        let (t, a, b) = apply_damage_and_terminate(&mut own, &mut oppo, &g, 5, 3000, 250.0);
        assert_eq!((t, a, b), (Termination::None, false, false));
        assert_eq!((own.life, oppo.life), (FULL_LIFE, FULL_LIFE));
    }

    #[test]
    fn max_steps_times_out() {
        let (mut own, mut oppo) = pair_at(15_000.0);
        let g = angles_or_coincident(&own.pose(), &oppo.pose());
        let (t, _, _) = apply_damage_and_terminate(&mut own, &mut oppo, &g, 3000, 3000, 250.0);
        assert_eq!(t, Termination::Timeout);
        assert!(!t.is_done() && t.is_terminal());
    }

    #[test]
    fn stepping_a_finished_episode_is_an_error() {
        let mut e = Engagement::new(EpisodeConfig {
            max_steps: 1,
            ..eval_config()
        });
        e.step(&ControlCommand::neutral()).unwrap();
        assert!(e.step(&ControlCommand::neutral()).is_err());
    }

    #[test]
    fn config_rejects_short_episodes() {
        let c = EpisodeConfig {
            max_steps: 64,
            ..EpisodeConfig::default()
        };
        assert!(c.validate(64).is_err());
        assert!(EpisodeConfig::default().validate(64).is_ok());
    }
}
