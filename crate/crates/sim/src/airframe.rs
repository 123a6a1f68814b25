//! Airframe coefficients and the standard atmosphere.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Sea-level density, slug/ft³.
pub const RHO_SL: f64 = 0.002_376_9;

/// ISA troposphere density, slug/ft³. Altitude is clamped to [0, 36089] ft.
pub fn density(altitude_ft: f64) -> f64 {
    let h = altitude_ft.clamp(0.0, 36_089.0);
    RHO_SL * (1.0 - 6.875_6e-6 * h).powf(4.2561)
}

/// Lumped fighter-class coefficients. Every field is configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Airframe {
    /// lbf
    pub weight: f64,
    /// ft²
    pub wing_area: f64,
    /// per radian
    pub cl_alpha: f64,
    /// Lift is linear up to this AoA (deg)...
    pub alpha_linear_deg: f64,
    /// ...then decays to `cl_stall_fraction` of its peak at this AoA (deg).
    pub alpha_stall_deg: f64,
    pub cl_stall_fraction: f64,
    pub cd0: f64,
    /// Induced drag factor k in CD = CD0 + k·CL².
    pub induced_drag: f64,
    /// Flat-plate drag growth, CD += cd_flat·sin²α.
    pub cd_flat: f64,
    /// Side-force slope per radian of sideslip.
    pub cy_beta: f64,
    /// Sea-level maximum thrust, lbf.
    pub thrust_sl: f64,
    /// Thrust scales with (ρ/ρ_SL)^thrust_lapse.
    pub thrust_lapse: f64,
    /// Max body rates p, q, r in deg/s.
    pub max_rates_deg: [f64; 3],
    /// First-order rate time constants p, q, r in s.
    pub rate_tau: [f64; 3],
    /// Pitch-rate authority is limited to produce at most this load factor.
    pub g_limit: f64,
}

impl Default for Airframe {
    fn default() -> Self {
        Self {
            weight: 25_000.0,
            wing_area: 300.0,
            cl_alpha: 3.5,
            alpha_linear_deg: 30.0,
            alpha_stall_deg: 45.0,
            cl_stall_fraction: 0.75,
            cd0: 0.022,
            induced_drag: 0.12,
            cd_flat: 1.2,
            cy_beta: -1.0,
            thrust_sl: 15_950.0,
            thrust_lapse: 0.7,
            max_rates_deg: [180.0, 30.0, 20.0],
            rate_tau: [0.4, 0.7, 1.0],
            g_limit: 9.0,
        }
    }
}

impl Airframe {
    /// The superior-spec variant: +15% thrust, +10% max rates.
    pub fn aggressor() -> Self {
        let base = Self::default();
        Self {
            thrust_sl: base.thrust_sl * 1.15,
            max_rates_deg: base.max_rates_deg.map(|r| r * 1.1),
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("weight", self.weight),
            ("wing_area", self.wing_area),
            ("cl_alpha", self.cl_alpha),
            ("thrust_sl", self.thrust_sl),
            ("g_limit", self.g_limit),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::Config(format!("airframe.{name} must be positive, got {v}")));
            }
        }
        if self
            .rate_tau
            .iter()
            .chain(&self.max_rates_deg)
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(SimError::Config(
                "airframe rates and time constants must be positive".into(),
            ));
        }
        if !(0.0 < self.alpha_linear_deg && self.alpha_linear_deg < self.alpha_stall_deg && self.alpha_stall_deg < 90.0)
        {
            return Err(SimError::Config(
                "airframe AoA breakpoints must satisfy 0 < linear < stall < 90".into(),
            ));
        }
        Ok(())
    }

    pub fn mass(&self) -> f64 {
        self.weight / crate::G
    }

    /// Lift coefficient, odd in α. Linear to the first breakpoint, decaying
    /// to the stall breakpoint, then falling to zero at 90°.
    pub fn lift_coefficient(&self, alpha_rad: f64) -> f64 {
        let a = alpha_rad.abs();
        let a1 = self.alpha_linear_deg.to_radians();
        let a2 = self.alpha_stall_deg.to_radians();
        let a3 = std::f64::consts::FRAC_PI_2;
        let peak = self.cl_alpha * a1;
        let stall = peak * self.cl_stall_fraction;
        let cl = if a <= a1 {
            self.cl_alpha * a
        } else if a <= a2 {
            peak + (stall - peak) * (a - a1) / (a2 - a1)
        } else if a <= a3 {
            stall * (a3 - a) / (a3 - a2)
        } else {
            0.0
        };
        cl.copysign(alpha_rad)
    }

    pub fn drag_coefficient(&self, alpha_rad: f64, cl: f64) -> f64 {
        let s = alpha_rad.sin();
        self.cd0 + self.induced_drag * cl * cl + self.cd_flat * s * s
    }

    /// Maximum thrust at altitude, lbf.
    pub fn max_thrust(&self, altitude_ft: f64) -> f64 {
        self.thrust_sl * (density(altitude_ft) / RHO_SL).powf(self.thrust_lapse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_at_reference_altitudes() {
        assert_eq!(density(0.0), RHO_SL);
        // ISA tables: 15000 ft ≈ 0.0014962 slug/ft³
        assert!((density(15_000.0) - 0.001_496_2).abs() < 2e-6);
    }

    #[test]
    fn lift_curve_shape() {
        let a = Airframe::default();
        let cl = |d: f64| a.lift_coefficient(d.to_radians());
        assert!((cl(10.0) - 3.5 * 10f64.to_radians()).abs() < 1e-12);
        assert!(cl(40.0) < cl(30.0));
        assert!(cl(60.0) < cl(45.0));
        assert!((cl(-20.0) + cl(20.0)).abs() < 1e-15);
        assert_eq!(cl(90.0), 0.0);
    }

    #[test]
    fn aggressor_is_stronger() {
        let (b, g) = (Airframe::default(), Airframe::aggressor());
        assert!((g.thrust_sl / b.thrust_sl - 1.15).abs() < 1e-12);
        assert!((g.max_rates_deg[0] / b.max_rates_deg[0] - 1.1).abs() < 1e-12);
        assert!(g.validate().is_ok());
    }

    #[test]
    fn validation_rejects_nonsense() {
        let bad = Airframe {
            weight: -1.0,
            ..Airframe::default()
        };
        assert!(bad.validate().is_err());
    }
}
