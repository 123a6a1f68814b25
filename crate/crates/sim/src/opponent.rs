//! Scripted opponent pilots.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::airframe::Airframe;
use crate::autopilot;
use crate::dynamics::{AircraftState, ControlCommand};
use crate::error::SimError;

/// Distance behind the target that lag pursuit aims for, ft.
const LAG_DISTANCE_FT: f64 = 2000.0;
/// Half-period of the weave: each turn lasts this long, s.
pub const WEAVE_PERIOD_S: f64 = 10.0;
const WEAVE_BANK_DEG: f64 = 60.0;
const WEAVE_PATH_DEG: f64 = 8.0;
const CHASE_RANGE_FT: f64 = 4000.0;
const OU_THETA: f64 = 0.5;
const OU_SIGMA: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpponentPolicy {
    PurePursuit,
    LagPursuit,
    EvasiveWeave,
    LevelCruise,
    Random,
}

impl OpponentPolicy {
    pub const ALL: [OpponentPolicy; 5] = [
        Self::PurePursuit,
        Self::LagPursuit,
        Self::EvasiveWeave,
        Self::LevelCruise,
        Self::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::PurePursuit => "pure_pursuit",
            Self::LagPursuit => "lag_pursuit",
            Self::EvasiveWeave => "evasive_weave",
            Self::LevelCruise => "level_cruise",
            Self::Random => "random",
        }
    }
}

impl fmt::Display for OpponentPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpponentPolicy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| SimError::Config(format!("unknown opponent policy {s:?}")))
    }
}

/// A scripted pilot. Any aircraft can fly a script, so the same controller
/// also provides the fixed baselines for the ownship.
#[derive(Debug, Clone)]
pub struct OpponentController {
    policy: OpponentPolicy,
    rng: ChaCha8Rng,
    noise: [f64; 4],
    elapsed: f64,
    hold: Option<(f64, f64, f64)>,
}

impl OpponentController {
    pub fn new(policy: OpponentPolicy, seed: u64) -> Self {
        Self {
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise: [0.0; 4],
            elapsed: 0.0,
            hold: None,
        }
    }

    pub fn policy(&self) -> OpponentPolicy {
        self.policy
    }

    /// Command for `pilot` flying against `target` over the next `dt`.
    pub fn command(
        &mut self,
        pilot: &AircraftState,
        target: &AircraftState,
        airframe: &Airframe,
        dt: f64,
    ) -> ControlCommand {
        let (heading, altitude, speed) = *self.hold.get_or_insert_with(|| {
            let (_, _, psi) = pilot.euler();
            (psi, pilot.altitude(), pilot.airspeed())
        });
        let t = self.elapsed;
        self.elapsed += dt;

        let scripted = match self.policy {
            OpponentPolicy::PurePursuit => ControlCommand {
                throttle: chase_throttle(pilot, target),
                ..autopilot::point_nose_at(pilot, &target.position, airframe)
            },
            OpponentPolicy::LagPursuit => {
                let tail = target.pose().heading() * LAG_DISTANCE_FT;
                let aim: Vector3<f64> = target.position - tail;
                ControlCommand {
                    throttle: chase_throttle(pilot, target),
                    ..autopilot::point_nose_at(pilot, &aim, airframe)
                }
            }
            OpponentPolicy::EvasiveWeave => {
                let sign = weave_sign(t);
                let drift = autopilot::ALTITUDE_BIAS * (altitude - pilot.altitude());
                let gamma = sign * WEAVE_PATH_DEG.to_radians() + drift.clamp(-0.1, 0.1);
                ControlCommand {
                    aileron: autopilot::roll_to(pilot, sign * WEAVE_BANK_DEG.to_radians(), airframe),
                    elevator: autopilot::path_to(pilot, gamma, airframe),
                    rudder: 0.0,
                    throttle: autopilot::speed_to(pilot, speed),
                }
            }
            OpponentPolicy::LevelCruise => autopilot::hold(pilot, heading, altitude, speed, airframe),
            OpponentPolicy::Random => {
                let scale = OU_SIGMA * dt.sqrt();
                for x in &mut self.noise {
                    let n: f64 = StandardNormal.sample(&mut self.rng);
                    *x += -OU_THETA * *x * dt + scale * n;
                }
                let [a, e, r, th] = self.noise;
                ControlCommand::from_array([a, e, r, 0.2 + th]).clamped()
            }
        };
        // the AI never flies into the ground on purpose
        autopilot::ground_avoidance(pilot, airframe)
            .unwrap_or(scripted)
            .clamped()
    }
}

/// Full power to close the distance, then match the target's speed.
fn chase_throttle(pilot: &AircraftState, target: &AircraftState) -> f64 {
    if (target.position - pilot.position).norm() > CHASE_RANGE_FT {
        1.0
    } else {
        autopilot::speed_to(pilot, target.airspeed())
    }
}

/// +1 for right climbing turns, −1 for left descending turns.
pub fn weave_sign(t: f64) -> f64 {
    if ((t / WEAVE_PERIOD_S).floor() as i64).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}
