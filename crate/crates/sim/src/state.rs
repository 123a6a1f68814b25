//! The 33-feature observation: 13 ownship features, 16 relative features,
//! and the previous action, each mapped linearly onto [-1, 1].

use crate::dynamics::{flip_z, AircraftState, ControlCommand};
use crate::error::{Result, SimError};
use crate::geometry::{angles_or_coincident, GeometrySnapshot};
use crate::{FPS_PER_KT, G};

pub const OWN_DIM: usize = 13;
pub const OPPO_DIM: usize = 16;
pub const ACTION_DIM: usize = 4;
pub const STATE_DIM: usize = OWN_DIM + OPPO_DIM + ACTION_DIM;

/// Index of the vertical-speed feature inside the vector.
pub const VZ_INDEX: usize = 12;

const TEN_G: f64 = 10.0 * G;
const REL_POS: f64 = 30_000.0;
/// Specific energy at 30000 ft and 800 kt, the top of the energy scale.
pub const E_MAX: f64 = 58_329.0;

/// Name and raw clamp range of every feature, in vector order.
pub const FEATURES: [(&str, f64, f64); STATE_DIM] = [
    ("tas_kt", 0.0, 1000.0),
    ("ax_fps2", -TEN_G, TEN_G),
    ("az_fps2", -TEN_G, TEN_G),
    ("roll_deg", -180.0, 180.0),
    ("pitch_deg", -90.0, 90.0),
    ("roll_rate_dps", -180.0, 180.0),
    ("pitch_rate_dps", -180.0, 180.0),
    ("yaw_rate_dps", -180.0, 180.0),
    ("aoa_deg", -180.0, 180.0),
    ("sideslip_deg", -90.0, 90.0),
    ("energy_ft", 0.0, E_MAX),
    ("altitude_ft", 0.0, 40_000.0),
    ("vz_fps", -1000.0, 1000.0),
    ("rel_north_ft", -REL_POS, REL_POS),
    ("rel_east_ft", -REL_POS, REL_POS),
    ("rel_up_ft", -REL_POS, REL_POS),
    ("rel_fwd_ft", -REL_POS, REL_POS),
    ("rel_right_ft", -REL_POS, REL_POS),
    ("rel_down_ft", -REL_POS, REL_POS),
    ("rel_roll_deg", -180.0, 180.0),
    ("rel_pitch_deg", -90.0, 90.0),
    ("rel_yaw_deg", -180.0, 180.0),
    ("deviation_deg", 0.0, 180.0),
    ("aspect_deg", 0.0, 180.0),
    ("angle_off_deg", 0.0, 180.0),
    ("horizontal_deg", 0.0, 180.0),
    ("elevation_deg", 0.0, 90.0),
    ("life_own", 0.0, 20.0),
    ("life_oppo", 0.0, 20.0),
    ("act_aileron", -1.0, 1.0),
    ("act_elevator", -1.0, 1.0),
    ("act_rudder", -1.0, 1.0),
    ("act_throttle", -1.0, 1.0),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub [f64; STATE_DIM]);

impl StateVector {
    pub fn zeros() -> Self {
        Self([0.0; STATE_DIM])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn own(&self) -> &[f64] {
        &self.0[..OWN_DIM]
    }

    pub fn oppo(&self) -> &[f64] {
        &self.0[OWN_DIM..OWN_DIM + OPPO_DIM]
    }

    pub fn prev_action(&self) -> &[f64] {
        &self.0[OWN_DIM + OPPO_DIM..]
    }
}

/// Maps each raw feature onto [-1, 1] through its range, clamping outliers.
pub fn normalize(raw: &[f64; STATE_DIM]) -> StateVector {
    let mut out = [0.0; STATE_DIM];
    for (o, (x, (_, lo, hi))) in out.iter_mut().zip(raw.iter().zip(FEATURES.iter())) {
        *o = (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0);
    }
    StateVector(out)
}

/// Normalized vertical speed, the quantity the altitude penalty consumes.
pub fn normalized_vz(vz_fps: f64) -> f64 {
    let (_, lo, hi) = FEATURES[VZ_INDEX];
    (2.0 * (vz_fps - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
}

/// Unnormalized features in the units named by [`FEATURES`].
pub fn raw_features(
    own: &AircraftState,
    oppo: &AircraftState,
    prev_action: &ControlCommand,
    geo: &GeometrySnapshot,
) -> [f64; STATE_DIM] {
    let (roll, pitch, _) = own.euler();
    let (roll_rate, pitch_rate, yaw_rate) = own.euler_rates();
    let (alpha, beta) = own.alpha_beta();
    let rel_e = oppo.position - own.position;
    let rel_b = own.attitude.inverse_transform_vector(&flip_z(&rel_e));
    let (o_roll, o_pitch, o_yaw) = (own.attitude.inverse() * oppo.attitude).euler_angles();
    let a = prev_action.to_array();
    [
        own.airspeed() / FPS_PER_KT,
        own.specific_force.x,
        own.specific_force.z,
        roll.to_degrees(),
        pitch.to_degrees(),
        roll_rate.to_degrees(),
        pitch_rate.to_degrees(),
        yaw_rate.to_degrees(),
        alpha.to_degrees(),
        beta.to_degrees(),
        own.specific_energy(),
        own.altitude(),
        own.vertical_speed(),
        rel_e.x,
        rel_e.y,
        rel_e.z,
        rel_b.x,
        rel_b.y,
        rel_b.z,
        o_roll.to_degrees(),
        o_pitch.to_degrees(),
        o_yaw.to_degrees(),
        geo.deviation,
        geo.aspect,
        geo.angle_off,
        geo.horizontal,
        geo.elevation,
        f64::from(own.life),
        f64::from(oppo.life),
        a[0],
        a[1],
        a[2],
        a[3],
    ]
}

pub fn build_state(own: &AircraftState, oppo: &AircraftState, prev_action: &ControlCommand) -> Result<StateVector> {
    if !own.is_finite() || !oppo.is_finite() || !prev_action.is_finite() {
        return Err(SimError::Contract("build_state given a non-finite input".into()));
    }
    let geo = angles_or_coincident(&own.pose(), &oppo.pose());
    Ok(normalize(&raw_features(own, oppo, prev_action, &geo)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airframe::Airframe;
    use nalgebra::Vector3;

    #[test]
    fn energy_reference() {
        let e = crate::specific_energy(30_000.0, 1350.1);
        assert!((e - E_MAX).abs() < 5.0, "{e}");
    }

    #[test]
    fn co_located_twins_have_zero_relative_features() {
        let af = Airframe::default();
        let s = AircraftState::level(Vector3::new(100.0, -50.0, 15_000.0), 800.0, 0.4, 0.5, &af);
        let raw = raw_features(
            &s,
            &s,
            &ControlCommand::neutral(),
            &angles_or_coincident(&s.pose(), &s.pose()),
        );
        for (i, v) in raw.iter().enumerate().take(22).skip(13) {
            assert!(v.abs() < 1e-9, "{} = {v}", FEATURES[i].0);
        }
    }

    #[test]
    fn every_entry_is_normalized() {
        let af = Airframe::default();
        let a = AircraftState::level(Vector3::new(0.0, 0.0, 90_000.0), 5000.0, 0.0, 0.5, &af);
        let b = AircraftState::level(Vector3::new(1e6, 0.0, -10.0), 10.0, 3.0, 0.5, &af);
        let x = build_state(&a, &b, &ControlCommand::from_array([2.0, -3.0, 0.0, 1.0])).unwrap();
        assert!(x.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let af = Airframe::default();
        let mut a = AircraftState::level(Vector3::new(0.0, 0.0, 9000.0), 800.0, 0.0, 0.5, &af);
        let b = a.clone();
        a.velocity.y = f64::INFINITY;
        assert!(build_state(&a, &b, &ControlCommand::neutral()).is_err());
    }

    #[test]
    fn slices_partition_the_vector() {
        let x = StateVector([0.5; STATE_DIM]);
        assert_eq!(x.own().len() + x.oppo().len() + x.prev_action().len(), STATE_DIM);
    }
}
