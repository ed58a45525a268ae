//! Attitude loop: quaternion error → body-rate setpoint (P) → torque (PID on
//! rate, scaled by inertia).

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttitudeGains {
    /// Angle → rate gain for roll and pitch, 1/s.
    pub angle_p: f64,
    pub yaw_angle_p: f64,
    /// Rate loop gains, producing angular acceleration.
    pub rate_p: [f64; 3],
    pub rate_i: [f64; 3],
    pub rate_d: [f64; 3],
    pub max_rate_radps: [f64; 3],
    pub rate_integrator_limit: f64,
    pub max_torque_nm: [f64; 3],
}

impl Default for AttitudeGains {
    fn default() -> Self {
        Self {
            angle_p: 6.5,
            yaw_angle_p: 2.8,
            rate_p: [16.0, 16.0, 6.0],
            rate_i: [6.0, 6.0, 1.0],
            rate_d: [0.25, 0.25, 0.0],
            max_rate_radps: [3.5, 3.5, 1.5],
            rate_integrator_limit: 2.0,
            max_torque_nm: [2.0, 2.0, 0.5],
        }
    }
}

#[derive(Debug, Clone)]
pub struct AttitudeController {
    pub gains: AttitudeGains,
    inertia: Vector3<f64>,
    integrator: Vector3<f64>,
    prev_rate_error: Option<Vector3<f64>>,
}

impl AttitudeController {
    pub fn new(gains: AttitudeGains, inertia: Vector3<f64>) -> Self {
        Self {
            gains,
            inertia,
            integrator: Vector3::zeros(),
            prev_rate_error: None,
        }
    }

    pub fn reset(&mut self) {
        self.integrator = Vector3::zeros();
        self.prev_rate_error = None;
    }

    /// Body-rate setpoint from the attitude error.
    pub fn rate_setpoint(
        &self,
        attitude: &UnitQuaternion<f64>,
        setpoint: &UnitQuaternion<f64>,
    ) -> Vector3<f64> {
        // tilt first: align the thrust axis, then close the yaw error about it
        let z_now = attitude.transform_vector(&Vector3::z());
        let z_sp = setpoint.transform_vector(&Vector3::z());
        let tilt = UnitQuaternion::rotation_between(&z_now, &z_sp).unwrap_or_else(|| {
            UnitQuaternion::from_axis_angle(&(attitude * Vector3::x_axis()), std::f64::consts::PI)
        });
        let reduced = tilt * attitude;
        let tilt_err = (attitude.inverse() * reduced).scaled_axis();
        let yaw_err = (reduced.inverse() * setpoint).scaled_axis().z;
        let g = &self.gains;
        let mut rates = Vector3::new(
            g.angle_p * tilt_err.x,
            g.angle_p * tilt_err.y,
            g.angle_p * tilt_err.z + g.yaw_angle_p * yaw_err,
        );
        for i in 0..3 {
            rates[i] = rates[i].clamp(-g.max_rate_radps[i], g.max_rate_radps[i]);
        }
        rates
    }

    /// Torque command tracking `rate_sp` given measured body rates.
    pub fn rate_control(
        &mut self,
        rates: &Vector3<f64>,
        rate_sp: &Vector3<f64>,
        dt: f64,
    ) -> Vector3<f64> {
        let g = &self.gains;
        let err = rate_sp - rates;
        let deriv = match self.prev_rate_error {
            Some(prev) if dt > 0.0 => (err - prev) / dt,
            _ => Vector3::zeros(),
        };
        self.prev_rate_error = Some(err);
        let mut torque = Vector3::zeros();
        for i in 0..3 {
            let lim = g.rate_integrator_limit;
            self.integrator[i] = (self.integrator[i] + g.rate_i[i] * err[i] * dt).clamp(-lim, lim);
            let accel = g.rate_p[i] * err[i] + self.integrator[i] + g.rate_d[i] * deriv[i];
            torque[i] = (self.inertia[i] * accel).clamp(-g.max_torque_nm[i], g.max_torque_nm[i]);
        }
        torque
    }

    pub fn update(
        &mut self,
        attitude: &UnitQuaternion<f64>,
        rates: &Vector3<f64>,
        setpoint: &UnitQuaternion<f64>,
        dt: f64,
    ) -> Vector3<f64> {
        let rate_sp = self.rate_setpoint(attitude, setpoint);
        self.rate_control(rates, &rate_sp, dt)
    }
}

/// Roll, pitch, yaw (intrinsic Z-Y-X) of an attitude.
pub fn euler(q: &UnitQuaternion<f64>) -> (f64, f64, f64) {
    q.euler_angles()
}

/// Tilt of the body z axis away from NED down, radians.
pub fn tilt_angle(q: &UnitQuaternion<f64>) -> f64 {
    let z = q.transform_vector(&Vector3::z());
    z.z.clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctrl() -> AttitudeController {
        AttitudeController::new(AttitudeGains::default(), Vector3::new(0.029, 0.029, 0.055))
    }

    #[test]
    fn no_error_no_torque() {
        let mut c = ctrl();
        let q = UnitQuaternion::from_euler_angles(0.1, -0.2, 0.3);
        let t = c.update(&q, &Vector3::zeros(), &q, 0.004);
        assert!(t.norm() < 1e-12);
    }

    #[test]
    fn pure_yaw_error_gives_positive_z_torque() {
        let mut c = ctrl();
        let sp = UnitQuaternion::from_euler_angles(0.0, 0.0, 10f64.to_radians());
        let t = c.update(&UnitQuaternion::identity(), &Vector3::zeros(), &sp, 0.004);
        assert!(t.z > 0.0);
        assert!(t.x.abs() < 1e-12 && t.y.abs() < 1e-12);
    }

    #[test]
    fn torque_is_bounded() {
        let mut c = ctrl();
        let sp = UnitQuaternion::from_euler_angles(3.0, 1.0, -2.0);
        let t = c.update(
            &UnitQuaternion::identity(),
            &Vector3::new(-20.0, 20.0, 5.0),
            &sp,
            0.004,
        );
        let g = AttitudeGains::default();
        for i in 0..3 {
            assert!(t[i].abs() <= g.max_torque_nm[i] + 1e-12);
        }
    }
}
