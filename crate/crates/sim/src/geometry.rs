//! Line-of-sight geometry between two aircraft and the WEZ test.
//!
//! Earth frame is X north, Y east, Z up. Body attitude is yaw-pitch-roll,
//! so the nose direction depends on yaw and pitch only.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Half-angle of the WEZ cone, degrees.
pub const WEZ_HALF_ANGLE_DEG: f64 = 2.0;
pub const WEZ_MIN_RANGE_FT: f64 = 500.0;
pub const WEZ_MAX_RANGE_FT: f64 = 3000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// ft, earth frame.
    pub position_e: Vector3<f64>,
    /// Roll, pitch, yaw in radians.
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    /// ft/s, earth frame.
    pub velocity_e: Vector3<f64>,
}

impl Pose {
    pub fn new(position_e: Vector3<f64>, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            position_e,
            roll: wrap_pi(roll),
            pitch: pitch.clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
            yaw: wrap_pi(yaw),
            velocity_e: Vector3::zeros(),
        }
    }

    pub fn with_velocity(mut self, velocity_e: Vector3<f64>) -> Self {
        self.velocity_e = velocity_e;
        self
    }

    /// Unit nose vector X_b in the earth frame.
    pub fn heading(&self) -> Vector3<f64> {
        let (st, ct) = self.pitch.sin_cos();
        let (sp, cp) = self.yaw.sin_cos();
        Vector3::new(ct * cp, ct * sp, st)
    }
}

/// All angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySnapshot {
    pub los: Vector3<f64>,
    pub range: f64,
    /// λ_b: ownship nose to LOS.
    pub deviation: f64,
    /// ε_b: opponent nose to LOS.
    pub aspect: f64,
    /// η_b: ownship nose to opponent nose.
    pub angle_off: f64,
    /// λ_e: horizontal heading to horizontal LOS.
    pub horizontal: f64,
    /// γ_e: LOS above or below the horizontal plane, unsigned.
    pub elevation: f64,
}

impl GeometrySnapshot {
    /// The opponent's own deviation angle, measured against −ρ.
    pub fn opponent_deviation(&self) -> f64 {
        180.0 - self.aspect
    }

    /// Stand-in used when the aircraft coincide: no WEZ can contain the
    /// opponent and every direction-dependent angle reads as perpendicular.
    pub fn coincident(own: &Pose, oppo: &Pose) -> Self {
        Self {
            los: Vector3::zeros(),
            range: 0.0,
            deviation: 90.0,
            aspect: 90.0,
            angle_off: angle_between(&own.heading(), &oppo.heading()).to_degrees(),
            horizontal: 0.0,
            elevation: 90.0,
        }
    }
}

pub fn los_vector(own: &Pose, oppo: &Pose) -> Vector3<f64> {
    oppo.position_e - own.position_e
}

/// Angle between two vectors in radians, in [0, π]. The atan2 form keeps
/// full precision near 0 and π where acos does not.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

pub fn angles(own: &Pose, oppo: &Pose) -> Result<GeometrySnapshot> {
    let los = los_vector(own, oppo);
    let range = los.norm();
    if range == 0.0 {
        return Err(SimError::DegenerateGeometry);
    }
    let x_own = own.heading();
    let x_oppo = oppo.heading();

    let los_h = Vector3::new(los.x, los.y, 0.0);
    let (horizontal, elevation) = if los_h.norm() == 0.0 {
        // pure vertical LOS
        (0.0, 90.0)
    } else {
        // the horizontal projection of X_b points along yaw whenever cos θ > 0
        let nose_h = Vector3::new(own.yaw.cos(), own.yaw.sin(), 0.0);
        (
            angle_between(&nose_h, &los_h).to_degrees(),
            angle_between(&los, &los_h).to_degrees(),
        )
    };

    Ok(GeometrySnapshot {
        los,
        range,
        deviation: angle_between(&x_own, &los).to_degrees(),
        aspect: angle_between(&x_oppo, &los).to_degrees(),
        angle_off: angle_between(&x_own, &x_oppo).to_degrees(),
        horizontal,
        elevation,
    })
}

/// Like [`angles`] but maps coincident aircraft to
/// [`GeometrySnapshot::coincident`].
pub fn angles_or_coincident(own: &Pose, oppo: &Pose) -> GeometrySnapshot {
    angles(own, oppo).unwrap_or_else(|_| GeometrySnapshot::coincident(own, oppo))
}

fn in_cone(deviation_deg: f64, range_ft: f64) -> bool {
    deviation_deg <= WEZ_HALF_ANGLE_DEG && (WEZ_MIN_RANGE_FT..=WEZ_MAX_RANGE_FT).contains(&range_ft)
}

/// True when the opponent sits inside the ownship's WEZ.
pub fn wez_contains(snapshot: &GeometrySnapshot) -> bool {
    in_cone(snapshot.deviation, snapshot.range)
}

/// True when the ownship sits inside the opponent's WEZ (same rule, roles
/// swapped).
pub fn opponent_wez_contains(snapshot: &GeometrySnapshot) -> bool {
    in_cone(snapshot.opponent_deviation(), snapshot.range)
}

pub fn wrap_pi(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}
