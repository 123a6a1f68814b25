//! The seven-term dogfight reward.
//!
//! | term | meaning                                   |
//! |------|-------------------------------------------|
//! | r1   | pursuit score scaled by energy state      |
//! | r2   | horizontal deviation penalty              |
//! | r3   | opponent inside ownship WEZ               |
//! | r4   | ownship inside opponent WEZ               |
//! | r5   | low-altitude penalty                      |
//! | r6   | angle-of-attack envelope penalty          |
//! | r7   | specific-energy tracking                  |

use serde::{Deserialize, Serialize};

use crate::{specific_energy, FPS_PER_KT};

/// Shapes the pursuit score over deviation angle and range.
pub trait PursuitScore {
    fn score(&self, deviation_deg: f64, range_ft: f64) -> f64;
}

/// f_p = clamp(1 − λ/λ₀, −1, 1) · exp(−((r − r_des)/r_scale)²)
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaussianPursuit {
    pub zero_crossing_deg: f64,
    pub desired_range_ft: f64,
    pub range_scale_ft: f64,
}

impl Default for GaussianPursuit {
    fn default() -> Self {
        Self {
            zero_crossing_deg: 30.0,
            desired_range_ft: 1000.0,
            range_scale_ft: 1500.0,
        }
    }
}

impl PursuitScore for GaussianPursuit {
    fn score(&self, deviation_deg: f64, range_ft: f64) -> f64 {
        let angular = (1.0 - deviation_deg / self.zero_crossing_deg).clamp(-1.0, 1.0);
        let z = (range_ft - self.desired_range_ft) / self.range_scale_ft;
        angular * (-z * z).exp()
    }
}

pub fn pursuit_score(deviation_deg: f64, range_ft: f64) -> f64 {
    GaussianPursuit::default().score(deviation_deg, range_ft)
}

/// Energy scaling κ. Ē is clamped to [0, 1.5] so κ stays non-negative.
pub fn kappa(f_p: f64, e_bar: f64) -> f64 {
    let e = e_bar.clamp(0.0, 1.5);
    if f_p < 0.0 {
        1.5 - e
    } else {
        0.5 + e
    }
}

pub fn r1_energy_pursuit(f_p: f64, e_bar: f64) -> f64 {
    kappa(f_p, e_bar) * f_p
}

pub fn r2_horizontal(horizontal_deg: f64) -> f64 {
    -horizontal_deg / 180.0
}

pub fn r34_wez(own_hit: bool, oppo_hit: bool) -> (f64, f64) {
    (if own_hit { 1.0 } else { 0.0 }, if oppo_hit { -1.0 } else { 0.0 })
}

/// `v_z` is the normalized vertical speed in [-1, 1].
pub fn r5_altitude(altitude_ft: f64, v_z: f64, z_min: f64, z_low: f64) -> f64 {
    let depth = ((altitude_ft - z_low) / (z_low - z_min)).min(0.0);
    0.5 * (1.0 + v_z.min(0.0)) * depth.powi(3)
}

pub fn r6_aoa(alpha_deg: f64) -> f64 {
    if alpha_deg < 0.0 {
        -alpha_deg.abs() / 45.0
    } else if alpha_deg < 45.0 {
        0.0
    } else {
        -(alpha_deg - 45.0) / 45.0
    }
}

pub fn r7_specific_energy(energy: f64, e_des: f64) -> f64 {
    ((energy - e_des) / e_des).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub weights: [f64; 7],
    /// Crash floor, ft.
    pub z_min: f64,
    /// Low-altitude warning threshold, ft.
    pub z_low: f64,
    /// Target specific energy, ft.
    pub e_des: f64,
    /// Energy that maps to Ē = 1, ft.
    pub e_ref: f64,
    pub pursuit: GaussianPursuit,
    /// One-off penalty for the step on which the ownship crashes. It sits
    /// outside the seven-term breakdown; environments subtract it from the
    /// step total.
    pub crash_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            weights: [1.0, 0.5, 10.0, 10.0, 2.0, 1.0, 0.2],
            z_min: 250.0,
            z_low: 1000.0,
            e_des: specific_energy(15_000.0, 400.0 * FPS_PER_KT),
            e_ref: specific_energy(30_000.0, 800.0 * FPS_PER_KT),
            pursuit: GaussianPursuit::default(),
            crash_penalty: 0.0,
        }
    }
}

/// Everything the reward needs from one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardInputs {
    pub deviation_deg: f64,
    pub range_ft: f64,
    pub horizontal_deg: f64,
    pub own_wez: bool,
    pub oppo_wez: bool,
    pub altitude_ft: f64,
    /// Normalized vertical speed in [-1, 1].
    pub v_z: f64,
    pub alpha_deg: f64,
    pub energy_ft: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub terms: [f64; 7],
    pub weights: [f64; 7],
    pub total: f64,
}

impl RewardBreakdown {
    pub fn from_terms(terms: [f64; 7], weights: [f64; 7]) -> Self {
        let mut total = 0.0;
        for i in 0..7 {
            total += weights[i] * terms[i];
        }
        Self { terms, weights, total }
    }

    pub fn zero(weights: [f64; 7]) -> Self {
        Self::from_terms([0.0; 7], weights)
    }
}

pub fn total_reward(inputs: &RewardInputs, config: &RewardConfig) -> RewardBreakdown {
    let f_p = config.pursuit.score(inputs.deviation_deg, inputs.range_ft);
    let e_bar = inputs.energy_ft / config.e_ref;
    let (r3, r4) = r34_wez(inputs.own_wez, inputs.oppo_wez);
    let terms = [
        r1_energy_pursuit(f_p, e_bar),
        r2_horizontal(inputs.horizontal_deg),
        r3,
        r4,
        r5_altitude(inputs.altitude_ft, inputs.v_z, config.z_min, config.z_low),
        r6_aoa(inputs.alpha_deg),
        r7_specific_energy(inputs.energy_ft, config.e_des),
    ];
    RewardBreakdown::from_terms(terms, config.weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pursuit_surface_points() {
        assert_eq!(pursuit_score(0.0, 1000.0), 1.0);
        assert_eq!(pursuit_score(30.0, 1234.0), 0.0);
        assert!((pursuit_score(0.0, 4000.0) - (-4f64).exp()).abs() < 1e-15);
        assert!(pursuit_score(90.0, 1000.0) < 0.0);
    }

    #[test]
    fn energy_pursuit_cases() {
        assert_eq!(r1_energy_pursuit(1.0, 0.5), 1.0);
        assert_eq!(r1_energy_pursuit(-0.5, 1.0), -0.25);
        assert_eq!(kappa(0.0, 0.3), 0.8);
        assert_eq!(r1_energy_pursuit(0.0, 0.3), 0.0);
    }

    #[test]
    fn horizontal_penalty() {
        assert_eq!(r2_horizontal(0.0), 0.0);
        assert_eq!(r2_horizontal(90.0), -0.5);
        assert_eq!(r2_horizontal(180.0), -1.0);
    }

    #[test]
    fn wez_terms() {
        assert_eq!(r34_wez(true, false), (1.0, 0.0));
        assert_eq!(r34_wez(false, true), (0.0, -1.0));
        assert_eq!(r34_wez(false, false), (0.0, 0.0));
    }

    #[test]
    fn altitude_penalty() {
        assert_eq!(r5_altitude(1500.0, -1.0, 250.0, 1000.0), 0.0);
        assert_eq!(r5_altitude(250.0, 0.0, 250.0, 1000.0), -0.5);
        assert_eq!(r5_altitude(625.0, -1.0, 250.0, 1000.0), 0.0);
    }

    #[test]
    fn aoa_penalty() {
        assert_eq!(r6_aoa(20.0), 0.0);
        assert!((r6_aoa(-9.0) + 0.2).abs() < 1e-15);
        assert!((r6_aoa(54.0) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn energy_tracking() {
        let e = RewardConfig::default().e_des;
        assert!((e - 22_082.0).abs() < 5.0, "E_des = {e}");
        assert_eq!(r7_specific_energy(e, e), 0.0);
        assert_eq!(r7_specific_energy(0.0, e), -1.0);
        assert_eq!(r7_specific_energy(3.0 * e, e), 1.0);
    }

    #[test]
    fn own_wez_only_totals_its_weight() {
        let c = RewardConfig {
            weights: [1.0, 0.5, 10.0, 10.0, 2.0, 1.0, 0.2],
            ..RewardConfig::default()
        };
        let zero = RewardBreakdown::zero(c.weights);
        assert_eq!(zero.total, 0.0);
        let mut terms = [0.0; 7];
        terms[2] = r34_wez(true, false).0;
        assert_eq!(RewardBreakdown::from_terms(terms, c.weights).total, c.weights[2]);
    }
}
