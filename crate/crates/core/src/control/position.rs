//! Position and velocity loops producing an attitude + collective thrust
//! setpoint.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::atmos::GRAVITY;

/// Hard tilt limit applied to every attitude setpoint.
pub const MAX_TILT_RAD: f64 = 35.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PositionGains {
    pub pos_p_xy: f64,
    pub pos_p_z: f64,
    pub vel_p_xy: f64,
    pub vel_i_xy: f64,
    pub vel_d_xy: f64,
    pub vel_p_z: f64,
    pub vel_i_z: f64,
    pub max_speed_xy: f64,
    pub max_climb: f64,
    pub max_descent: f64,
    pub max_accel_xy: f64,
    pub integrator_limit: f64,
}

impl Default for PositionGains {
    fn default() -> Self {
        Self {
            pos_p_xy: 1.0,
            pos_p_z: 1.2,
            vel_p_xy: 2.2,
            vel_i_xy: 0.6,
            vel_d_xy: 0.0,
            vel_p_z: 4.0,
            vel_i_z: 1.5,
            max_speed_xy: 5.0,
            max_climb: 2.5,
            max_descent: 1.5,
            max_accel_xy: 6.0,
            integrator_limit: 1.5,
        }
    }
}

/// Attitude and normalized collective thrust for the inner loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustSetpoint {
    pub attitude_q: UnitQuaternion<f64>,
    /// Collective thrust as a fraction of the maximum, in [0, 1].
    pub thrust: f64,
}

#[derive(Debug, Clone)]
pub struct PositionController {
    pub gains: PositionGains,
    mass_kg: f64,
    max_thrust_n: f64,
    integrator: Vector3<f64>,
}

impl PositionController {
    pub fn new(gains: PositionGains, mass_kg: f64, max_thrust_n: f64) -> Self {
        Self {
            gains,
            mass_kg,
            max_thrust_n,
            integrator: Vector3::zeros(),
        }
    }

    pub fn reset(&mut self) {
        self.integrator = Vector3::zeros();
    }

    pub fn hover_thrust_fraction(&self) -> f64 {
        self.mass_kg * GRAVITY / self.max_thrust_n
    }

    /// Position error → clamped velocity setpoint, plus feed-forward.
    pub fn velocity_setpoint(
        &self,
        position: &Vector3<f64>,
        target: &Vector3<f64>,
        feed_forward: &Vector3<f64>,
    ) -> Vector3<f64> {
        let g = &self.gains;
        let err = target - position;
        let mut v =
            Vector3::new(g.pos_p_xy * err.x, g.pos_p_xy * err.y, g.pos_p_z * err.z) + feed_forward;
        let h = v.xy().norm();
        if h > g.max_speed_xy {
            let k = g.max_speed_xy / h;
            v.x *= k;
            v.y *= k;
        }
        v.z = v.z.clamp(-g.max_climb, g.max_descent);
        v
    }

    /// Velocity error → acceleration → tilt and collective thrust.
    pub fn velocity_control(
        &mut self,
        velocity: &Vector3<f64>,
        velocity_sp: &Vector3<f64>,
        accel_ff: &Vector3<f64>,
        yaw_sp: f64,
        dt: f64,
    ) -> ThrustSetpoint {
        let g = &self.gains;
        let err = velocity_sp - velocity;
        let lim = g.integrator_limit;
        self.integrator.x = (self.integrator.x + g.vel_i_xy * err.x * dt).clamp(-lim, lim);
        self.integrator.y = (self.integrator.y + g.vel_i_xy * err.y * dt).clamp(-lim, lim);
        self.integrator.z = (self.integrator.z + g.vel_i_z * err.z * dt).clamp(-lim, lim);
        let mut accel = Vector3::new(g.vel_p_xy * err.x, g.vel_p_xy * err.y, g.vel_p_z * err.z)
            + self.integrator
            + accel_ff;
        let h = accel.xy().norm();
        if h > g.max_accel_xy {
            let k = g.max_accel_xy / h;
            accel.x *= k;
            accel.y *= k;
        }
        self.thrust_from_accel(&accel, yaw_sp)
    }

    /// Converts a desired NED acceleration into attitude and thrust,
    /// respecting the tilt limit.
    pub fn thrust_from_accel(&self, accel: &Vector3<f64>, yaw_sp: f64) -> ThrustSetpoint {
        // thrust force needed, NED; gravity is +z
        let mut force = self.mass_kg * (accel - Vector3::new(0.0, 0.0, GRAVITY));
        // never ask for downward thrust
        if force.z > -0.1 * self.mass_kg * GRAVITY {
            force.z = -0.1 * self.mass_kg * GRAVITY;
        }
        let horiz = force.xy().norm();
        let max_horiz = -force.z * MAX_TILT_RAD.tan();
        if horiz > max_horiz {
            let k = max_horiz / horiz;
            force.x *= k;
            force.y *= k;
        }
        let body_z = -force.normalize();
        let attitude_q = attitude_from_body_z(&body_z, yaw_sp);
        let thrust = (force.norm() / self.max_thrust_n).clamp(0.0, 1.0);
        ThrustSetpoint { attitude_q, thrust }
    }

    pub fn update(
        &mut self,
        position: &Vector3<f64>,
        velocity: &Vector3<f64>,
        target: &Vector3<f64>,
        velocity_ff: &Vector3<f64>,
        yaw_sp: f64,
        dt: f64,
    ) -> ThrustSetpoint {
        let v_sp = self.velocity_setpoint(position, target, velocity_ff);
        self.velocity_control(velocity, &v_sp, &Vector3::zeros(), yaw_sp, dt)
    }
}

/// Attitude whose body z axis is `body_z` (NED) with heading `yaw`.
pub fn attitude_from_body_z(body_z: &Vector3<f64>, yaw: f64) -> UnitQuaternion<f64> {
    let heading = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
    let mut body_y = body_z.cross(&heading);
    if body_y.norm() < 1e-9 {
        body_y = Vector3::new(-yaw.sin(), yaw.cos(), 0.0);
    }
    let body_y = body_y.normalize();
    let body_x = body_y.cross(body_z);
    let m = Matrix3::from_columns(&[body_x, body_y, *body_z]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}
