//! Small inner-loop controllers shared by the scripted pilots.

use nalgebra::Vector3;

use crate::airframe::Airframe;
use crate::dynamics::{flip_z, AircraftState, ControlCommand};
use crate::geometry::wrap_pi;
use crate::{FPS_PER_KT, G};

const ROLL_GAIN: f64 = 2.5;
const PATH_GAIN: f64 = 1.0;
const HEADING_GAIN: f64 = 2.0;
const ALTITUDE_GAIN: f64 = 5e-4;
const SPEED_GAIN: f64 = 0.01;
const FLOOR_FT: f64 = 3000.0;
const MIN_SPEED_KT: f64 = 280.0;
/// Keeps manoeuvring scripts near their starting altitude, rad per ft.
pub const ALTITUDE_BIAS: f64 = 2e-4;

fn pitch_authority(state: &AircraftState, airframe: &Airframe) -> f64 {
    let q_max = airframe.max_rates_deg[1].to_radians();
    q_max.min(airframe.g_limit * G / state.airspeed().max(1.0))
}

/// Aileron command driving roll toward `bank` (rad).
pub fn roll_to(state: &AircraftState, bank: f64, airframe: &Airframe) -> f64 {
    let (phi, _, _) = state.euler();
    let p_max = airframe.max_rates_deg[0].to_radians();
    (ROLL_GAIN * wrap_pi(bank - phi) / p_max).clamp(-1.0, 1.0)
}

/// Flight-path angle above the horizon, rad.
pub fn path_angle(state: &AircraftState) -> f64 {
    let v = state.airspeed();
    if v == 0.0 {
        return 0.0;
    }
    (state.velocity.z / v).clamp(-1.0, 1.0).asin()
}

/// Elevator command that turns the flight path toward `gamma` (rad) while
/// carrying the load factor the current bank needs.
pub fn path_to(state: &AircraftState, gamma: f64, airframe: &Airframe) -> f64 {
    let (phi, _, _) = state.euler();
    let v = state.airspeed().max(1.0);
    // trade altitude for speed rather than climb into a stall
    let gamma = if v < MIN_SPEED_KT * FPS_PER_KT {
        gamma.min(-5f64.to_radians())
    } else {
        gamma
    };
    let g_now = path_angle(state);
    let level_n = g_now.cos() / phi.cos().max(0.3);
    let n = (level_n + PATH_GAIN * (gamma - g_now) * v / G).clamp(-2.0, airframe.g_limit);
    let q = G / v * (n - g_now.cos() * phi.cos());
    (q / pitch_authority(state, airframe)).clamp(-1.0, 1.0)
}

pub fn speed_to(state: &AircraftState, speed_fps: f64) -> f64 {
    let frac = 0.45 + SPEED_GAIN * (speed_fps - state.airspeed());
    ControlCommand::throttle_command(frac.clamp(0.0, 1.0))
}

/// Bank toward a heading and climb or descend toward an altitude.
pub fn hold(state: &AircraftState, heading: f64, altitude: f64, speed_fps: f64, airframe: &Airframe) -> ControlCommand {
    let (_, _, psi) = state.euler();
    let max_bank = 45f64.to_radians();
    let bank = (HEADING_GAIN * wrap_pi(heading - psi)).clamp(-max_bank, max_bank);
    let max_path = 10f64.to_radians();
    let gamma = (ALTITUDE_GAIN * (altitude - state.altitude())).clamp(-max_path, max_path);
    ControlCommand {
        aileron: roll_to(state, bank, airframe),
        elevator: path_to(state, gamma, airframe),
        rudder: 0.0,
        throttle: speed_to(state, speed_fps),
    }
}

/// Steers the nose toward an earth-frame point: roll the point into the
/// lift plane, pull toward it, trim the last few degrees with rudder.
pub fn point_nose_at(state: &AircraftState, target: &Vector3<f64>, airframe: &Airframe) -> ControlCommand {
    let d = flip_z(&(target - state.position));
    let n = d.norm();
    if n == 0.0 {
        return ControlCommand::neutral();
    }
    let d_b = state.attitude.inverse_transform_vector(&(d / n));
    let off_boresight = d_b.x.clamp(-1.0, 1.0).acos();
    let (phi, _, _) = state.euler();

    // bank error that puts the target straight above the canopy
    let bank_err = d_b.y.atan2(-d_b.z);
    // near dead ahead the bank error is ill-defined; fade toward wings level
    let blend = (off_boresight / 5f64.to_radians()).min(1.0);
    let roll_err = blend * bank_err + (1.0 - blend) * wrap_pi(-phi);
    let p_max = airframe.max_rates_deg[0].to_radians();
    let aileron = (ROLL_GAIN * roll_err / p_max).clamp(-1.0, 1.0);

    let elevator = if d_b.x > 0.0 {
        let elevation = (-d_b.z).atan2(d_b.x);
        (3.0 * elevation / pitch_authority(state, airframe)).clamp(-1.0, 1.0)
    } else if -d_b.z >= 0.0 {
        // target behind and above the wings: full pull
        1.0
    } else {
        // finish the roll before pulling
        0.2
    };
    let azimuth = d_b.y.atan2(d_b.x);
    let r_max = airframe.max_rates_deg[2].to_radians();
    let rudder = if off_boresight < 10f64.to_radians() {
        (2.0 * azimuth / r_max).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    ControlCommand {
        aileron,
        elevator,
        rudder,
        throttle: 0.0,
    }
}

/// Wings-level pull-up at full power when the aircraft is low and sinking.
pub fn ground_avoidance(state: &AircraftState, airframe: &Airframe) -> Option<ControlCommand> {
    let predicted = state.altitude() + 5.0 * state.vertical_speed().min(0.0);
    if predicted >= FLOOR_FT {
        return None;
    }
    Some(ControlCommand {
        aileron: roll_to(state, 0.0, airframe),
        elevator: path_to(state, 15f64.to_radians(), airframe),
        rudder: 0.0,
        throttle: 1.0,
    })
}
