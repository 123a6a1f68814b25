//! Pseudo-6-DOF aircraft model.
//!
//! Attitude is integrated from body rates that follow the stick with a
//! first-order lag. Translation is a point mass under lift, side force,
//! drag, thrust and gravity. The speed update goes through specific energy
//! so that without thrust E can only fall, whatever the step size.
//!
//! Internally the earth frame is NED and the body frame FRD; the public
//! fields use the Z-up interface frame.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::airframe::{density, Airframe};
use crate::error::{Result, SimError};
use crate::geometry::Pose;
use crate::G;

/// Below this the energy update would produce a stationary aircraft.
const MIN_SPEED: f64 = 1.0;
/// Restoring rate per radian of AoA beyond stall (or sideslip beyond the
/// limit), 1/s.
const WEATHERVANE: f64 = 2.0;
const SIDESLIP_LIMIT: f64 = 0.5;
/// Flip between the Z-up interface frame and NED (the map is its own inverse).
#[inline]
pub fn flip_z(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(v.x, v.y, -v.z)
}

/// Stick, rudder and throttle, each in [-1, 1]. Throttle maps to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub aileron: f64,
    pub elevator: f64,
    pub rudder: f64,
    pub throttle: f64,
}

impl ControlCommand {
    /// Neutral surfaces at half throttle.
    pub fn neutral() -> Self {
        Self::default()
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            aileron: a[0],
            elevator: a[1],
            rudder: a[2],
            throttle: a[3],
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.aileron, self.elevator, self.rudder, self.throttle]
    }

    pub fn clamped(self) -> Self {
        Self::from_array(self.to_array().map(|v| v.clamp(-1.0, 1.0)))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Throttle setting in [0, 1].
    pub fn throttle_fraction(&self) -> f64 {
        0.5 * (self.throttle.clamp(-1.0, 1.0) + 1.0)
    }

    pub fn throttle_command(fraction: f64) -> f64 {
        (2.0 * fraction - 1.0).clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AircraftState {
    /// ft, interface frame.
    pub position: Vector3<f64>,
    /// ft/s, interface frame.
    pub velocity: Vector3<f64>,
    /// Body (FRD) to NED rotation.
    pub attitude: UnitQuaternion<f64>,
    /// Body rates p, q, r in rad/s.
    pub rates: Vector3<f64>,
    /// Current throttle fraction in [0, 1].
    pub throttle: f64,
    /// Non-gravitational acceleration in body axes (what an accelerometer
    /// reads), ft/s².
    pub specific_force: Vector3<f64>,
    pub life: u8,
}

/// Aerodynamic and propulsive forces at one instant.
struct Loads {
    /// Non-gravitational force, NED, lbf.
    force: Vector3<f64>,
}

impl AircraftState {
    /// Wings level, nose along the velocity vector, rates at rest.
    pub fn level(position: Vector3<f64>, speed_fps: f64, heading_rad: f64, throttle: f64, airframe: &Airframe) -> Self {
        Self::with_attitude(position, speed_fps, heading_rad, 0.0, throttle, airframe)
    }

    fn with_attitude(
        position: Vector3<f64>,
        speed_fps: f64,
        heading_rad: f64,
        pitch_rad: f64,
        throttle: f64,
        airframe: &Airframe,
    ) -> Self {
        let velocity = Vector3::new(heading_rad.cos(), heading_rad.sin(), 0.0) * speed_fps;
        let mut s = Self {
            position,
            velocity,
            attitude: UnitQuaternion::from_euler_angles(0.0, pitch_rad, heading_rad),
            rates: Vector3::zeros(),
            throttle: throttle.clamp(0.0, 1.0),
            specific_force: Vector3::zeros(),
            life: 20,
        };
        s.refresh_specific_force(airframe);
        s
    }

    pub fn refresh_specific_force(&mut self, airframe: &Airframe) {
        let loads = loads(
            airframe,
            &self.attitude,
            &flip_z(&self.velocity),
            self.position.z,
            self.throttle,
        );
        let body = self.attitude.inverse_transform_vector(&loads.force);
        self.specific_force = body / airframe.mass();
    }

    /// (roll, pitch, yaw) in radians.
    pub fn euler(&self) -> (f64, f64, f64) {
        self.attitude.euler_angles()
    }

    pub fn pose(&self) -> Pose {
        let (r, p, y) = self.euler();
        Pose::new(self.position, r, p, y).with_velocity(self.velocity)
    }

    pub fn altitude(&self) -> f64 {
        self.position.z
    }

    /// True airspeed, ft/s (no wind, so ground speed).
    pub fn airspeed(&self) -> f64 {
        self.velocity.norm()
    }

    pub fn vertical_speed(&self) -> f64 {
        self.velocity.z
    }

    pub fn specific_energy(&self) -> f64 {
        crate::specific_energy(self.altitude(), self.airspeed())
    }

    /// Angle of attack and sideslip, radians.
    pub fn alpha_beta(&self) -> (f64, f64) {
        let v_b = self.attitude.inverse_transform_vector(&flip_z(&self.velocity));
        alpha_beta(&v_b)
    }

    /// Euler-angle rates (φ̇, θ̇, ψ̇) from the body rates, rad/s.
    pub fn euler_rates(&self) -> (f64, f64, f64) {
        let (phi, theta, _) = self.euler();
        let (p, q, r) = (self.rates.x, self.rates.y, self.rates.z);
        let (sp, cp) = phi.sin_cos();
        // avoid the division blowing up exactly at the vertical
        let ct = theta.cos().max(1e-6);
        let tt = theta.sin() / ct;
        (p + (q * sp + r * cp) * tt, q * cp - r * sp, (q * sp + r * cp) / ct)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.attitude.coords.iter().all(|v| v.is_finite())
            && self.rates.iter().all(|v| v.is_finite())
            && self.throttle.is_finite()
    }
}

fn alpha_beta(v_b: &Vector3<f64>) -> (f64, f64) {
    let v = v_b.norm();
    if v == 0.0 {
        return (0.0, 0.0);
    }
    (v_b.z.atan2(v_b.x), (v_b.y / v).clamp(-1.0, 1.0).asin())
}

fn loads(
    airframe: &Airframe,
    attitude: &UnitQuaternion<f64>,
    v_ned: &Vector3<f64>,
    altitude: f64,
    throttle: f64,
) -> Loads {
    let rot: Matrix3<f64> = *attitude.to_rotation_matrix().matrix();
    let x_b = rot.column(0).into_owned();
    let y_b = rot.column(1).into_owned();
    let thrust = x_b * (throttle * airframe.max_thrust(altitude));

    let speed = v_ned.norm();
    if speed == 0.0 {
        return Loads { force: thrust };
    }
    let v_hat = v_ned / speed;
    let v_b = attitude.inverse_transform_vector(v_ned);
    let (alpha, beta) = alpha_beta(&v_b);

    // lift acts perpendicular to the wind in the plane of symmetry
    let lift_dir = {
        let l = y_b.cross(&v_hat);
        let n = l.norm();
        if n > 1e-12 {
            l / n
        } else {
            -rot.column(2).into_owned()
        }
    };
    let side_dir = v_hat.cross(&lift_dir);

    let qbar_s = 0.5 * density(altitude) * speed * speed * airframe.wing_area;
    let cl = airframe.lift_coefficient(alpha);
    let cd = airframe.drag_coefficient(alpha, cl);
    let cy = airframe.cy_beta * beta;
    let aero = (lift_dir * cl + side_dir * cy - v_hat * cd) * qbar_s;
    Loads { force: aero + thrust }
}

/// Advances one aircraft by `dt` seconds.
pub fn step_dynamics(
    state: &AircraftState,
    cmd: &ControlCommand,
    dt: f64,
    airframe: &Airframe,
) -> Result<AircraftState> {
    if !state.is_finite() {
        return Err(SimError::Fault("non-finite aircraft state".into()));
    }
    if !cmd.is_finite() {
        return Err(SimError::Fault("non-finite control command".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::Contract(format!("dt must be positive, got {dt}")));
    }
    let cmd = cmd.clamped();
    let speed = state.airspeed().max(MIN_SPEED);

    // body rates: exact first-order response toward the commanded rate
    let [p_max, q_max, r_max] = airframe.max_rates_deg.map(f64::to_radians);
    let q_lim = q_max.min(airframe.g_limit * G / speed);
    let mut target = Vector3::new(cmd.aileron * p_max, cmd.elevator * q_lim, cmd.rudder * r_max);
    // past the stall the tail wins: the nose weathervanes back into the wind
    let (alpha, beta) = state.alpha_beta();
    let a_stall = airframe.alpha_stall_deg.to_radians();
    let excess_alpha = alpha - alpha.clamp(-a_stall, a_stall);
    let excess_beta = beta - beta.clamp(-SIDESLIP_LIMIT, SIDESLIP_LIMIT);
    target.y -= (WEATHERVANE * excess_alpha).clamp(-2.0 * q_max, 2.0 * q_max);
    target.z += (WEATHERVANE * excess_beta).clamp(-2.0 * r_max, 2.0 * r_max);
    let mut rates = state.rates;
    for i in 0..3 {
        let decay = (-dt / airframe.rate_tau[i]).exp();
        rates[i] = target[i] + (rates[i] - target[i]) * decay;
    }
    let attitude = state.attitude * UnitQuaternion::from_scaled_axis(rates * dt);
    let throttle = cmd.throttle_fraction();

    // translation
    let v_ned = flip_z(&state.velocity);
    let v_hat = v_ned / speed;
    let loads = loads(airframe, &attitude, &v_ned, state.position.z, throttle);
    let mass = airframe.mass();
    let a_ng = loads.force / mass;
    let accel = a_ng + Vector3::new(0.0, 0.0, G);
    let a_normal = accel - v_hat * accel.dot(&v_hat);
    let an = a_normal.norm();
    let new_dir = if an > 1e-12 {
        let axis = nalgebra::Unit::new_normalize(v_hat.cross(&a_normal));
        nalgebra::Rotation3::from_axis_angle(&axis, an * dt / speed) * v_hat
    } else {
        v_hat
    };
    let position = state.position + flip_z(&new_dir) * (speed * dt);

    // power balance sets the new energy height
    let energy = crate::specific_energy(state.position.z, speed) + speed * a_ng.dot(&v_hat) / G * dt;
    let kinetic_height = energy - position.z;
    let new_speed = if kinetic_height > 0.0 {
        (2.0 * G * kinetic_height).sqrt().max(MIN_SPEED)
    } else {
        MIN_SPEED
    };
    let velocity = flip_z(&new_dir) * new_speed;

    let mut next = AircraftState {
        position,
        velocity,
        attitude,
        rates,
        throttle,
        specific_force: attitude.inverse_transform_vector(&loads.force) / mass,
        life: state.life,
    };
    if !next.is_finite() {
        return Err(SimError::Fault("integration produced a non-finite state".into()));
    }
    next.attitude.renormalize();
    Ok(next)
}

/// Steady level flight at the given speed and altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trim {
    pub alpha: f64,
    /// Throttle fraction in [0, 1].
    pub throttle: f64,
}

/// Solves lift + thrust·sin α = W with thrust·cos α = D by bisection on α.
pub fn trim_level(airframe: &Airframe, speed_fps: f64, altitude_ft: f64) -> Result<Trim> {
    let qbar_s = 0.5 * density(altitude_ft) * speed_fps * speed_fps * airframe.wing_area;
    let residual = |alpha: f64| {
        let cl = airframe.lift_coefficient(alpha);
        let drag = qbar_s * airframe.drag_coefficient(alpha, cl);
        qbar_s * cl + drag * alpha.tan() - airframe.weight
    };
    let (mut lo, mut hi) = (0.0, airframe.alpha_linear_deg.to_radians());
    if residual(hi) < 0.0 {
        return Err(SimError::Config(format!(
            "cannot trim at {speed_fps:.1} ft/s: insufficient lift"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let cl = airframe.lift_coefficient(alpha);
    let thrust = qbar_s * airframe.drag_coefficient(alpha, cl) / alpha.cos();
    let throttle = thrust / airframe.max_thrust(altitude_ft);
    if throttle > 1.0 {
        return Err(SimError::Config(format!(
            "cannot trim at {speed_fps:.1} ft/s: needs {throttle:.2} throttle"
        )));
    }
    Ok(Trim { alpha, throttle })
}

/// A trimmed aircraft in level flight: pitched up by the trim AoA.
pub fn trimmed_state(
    airframe: &Airframe,
    position: Vector3<f64>,
    speed_fps: f64,
    heading_rad: f64,
) -> Result<(AircraftState, Trim)> {
    let trim = trim_level(airframe, speed_fps, position.z)?;
    let s = AircraftState::with_attitude(position, speed_fps, heading_rad, trim.alpha, trim.throttle, airframe);
    Ok((s, trim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FPS_PER_KT;

    fn cruise() -> (AircraftState, Trim, Airframe) {
        let af = Airframe::default();
        let (s, t) = trimmed_state(&af, Vector3::new(0.0, 0.0, 15_000.0), 500.0 * FPS_PER_KT, 0.0).unwrap();
        (s, t, af)
    }

    #[test]
    fn trim_at_cruise_is_plausible() {
        let (_, t, _) = cruise();
        assert!(
            (1.0..5.0).contains(&t.alpha.to_degrees()),
            "alpha {}",
            t.alpha.to_degrees()
        );
        assert!((0.2..0.6).contains(&t.throttle), "throttle {}", t.throttle);
    }

    #[test]
    fn trimmed_flight_holds_altitude() {
        let (mut s, t, af) = cruise();
        let cmd = ControlCommand {
            throttle: ControlCommand::throttle_command(t.throttle),
            ..ControlCommand::neutral()
        };
        for _ in 0..100 {
            s = step_dynamics(&s, &cmd, 0.1, &af).unwrap();
        }
        assert!(
            (s.altitude() - 15_000.0).abs() < 50.0,
            "drift {}",
            s.altitude() - 15_000.0
        );
    }

    #[test]
    fn full_aileron_rolls_monotonically() {
        let (mut s, t, af) = cruise();
        let cmd = ControlCommand {
            aileron: 1.0,
            throttle: ControlCommand::throttle_command(t.throttle),
            ..ControlCommand::neutral()
        };
        // unwrap roll so the monotone check survives passing ±180°
        let mut total = 0.0;
        let mut last = s.euler().0;
        for _ in 0..20 {
            s = step_dynamics(&s, &cmd, 0.1, &af).unwrap();
            let r = s.euler().0;
            let d = crate::geometry::wrap_pi(r - last);
            assert!(d > 0.0);
            total += d;
            last = r;
        }
        assert!(total > 0.0);
    }

    #[test]
    fn zero_thrust_bleeds_speed_and_energy() {
        let (mut s, _, af) = cruise();
        let cmd = ControlCommand {
            throttle: -1.0,
            ..ControlCommand::neutral()
        };
        for _ in 0..20 {
            let n = step_dynamics(&s, &cmd, 0.1, &af).unwrap();
            assert!(n.airspeed() < s.airspeed());
            assert!(n.specific_energy() <= s.specific_energy() + 1e-3);
            s = n;
        }
    }

    #[test]
    fn identical_inputs_are_bit_identical() {
        let (s, _, af) = cruise();
        let cmd = ControlCommand::from_array([0.3, -0.2, 0.1, 0.4]);
        let a = step_dynamics(&s, &cmd, 0.1, &af).unwrap();
        let b = step_dynamics(&s, &cmd, 0.1, &af).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_state_is_a_fault() {
        let (mut s, _, af) = cruise();
        s.position.x = f64::NAN;
        assert!(matches!(
            step_dynamics(&s, &ControlCommand::neutral(), 0.1, &af),
            Err(SimError::Fault(_))
        ));
    }

    #[test]
    fn level_state_has_no_alpha() {
        let af = Airframe::default();
        let s = AircraftState::level(Vector3::new(0.0, 0.0, 15_000.0), 800.0, 1.0, 0.5, &af);
        let (a, b) = s.alpha_beta();
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
        assert!((s.euler().2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heading_matches_velocity_for_level_state() {
        let af = Airframe::default();
        let s = AircraftState::level(Vector3::new(0.0, 0.0, 15_000.0), 800.0, 0.7, 0.5, &af);
        let h = s.pose().heading();
        assert!((h - s.velocity / 800.0).norm() < 1e-12);
    }
}
