//! Stick input decoding and manual setpoints.

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use super::position::MAX_TILT_RAD;

pub const PWM_MIN: u16 = 1000;
pub const PWM_MID: u16 = 1500;
pub const PWM_MAX: u16 = 2000;
/// Sticks within this fraction of center read as centered.
pub const STICK_DEADBAND: f64 = 0.05;

/// Normalized sticks. Roll, pitch and yaw in [-1, 1]; throttle in [0, 1].
/// Pitch is positive for stick forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcInput {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub throttle: f64,
}

impl Default for RcInput {
    fn default() -> Self {
        Self::centered()
    }
}

fn pwm_to_unit(pwm: u16) -> f64 {
    ((pwm as f64 - PWM_MID as f64) / (PWM_MAX - PWM_MID) as f64).clamp(-1.0, 1.0)
}

fn unit_to_pwm(x: f64) -> u16 {
    (PWM_MID as f64 + x.clamp(-1.0, 1.0) * (PWM_MAX - PWM_MID) as f64).round() as u16
}

impl RcInput {
    pub fn centered() -> Self {
        Self {
            roll: 0.0,
            pitch: 0.0,
            yaw: 0.0,
            throttle: 0.5,
        }
    }

    /// Channels 1-4 are roll, pitch, throttle, yaw in microseconds.
    pub fn from_pwm(channels: &[u16]) -> Option<Self> {
        if channels.len() < 4 {
            return None;
        }
        let throttle =
            ((channels[2] as f64 - PWM_MIN as f64) / (PWM_MAX - PWM_MIN) as f64).clamp(0.0, 1.0);
        Some(Self {
            roll: pwm_to_unit(channels[0]),
            pitch: pwm_to_unit(channels[1]),
            yaw: pwm_to_unit(channels[3]),
            throttle,
        })
    }

    pub fn to_pwm(&self) -> [u16; 4] {
        [
            unit_to_pwm(self.roll),
            unit_to_pwm(self.pitch),
            unit_to_pwm(self.throttle * 2.0 - 1.0),
            unit_to_pwm(self.yaw),
        ]
    }
}

pub fn deadband(x: f64) -> f64 {
    if x.abs() <= STICK_DEADBAND {
        0.0
    } else {
        (x - STICK_DEADBAND * x.signum()) / (1.0 - STICK_DEADBAND)
    }
}

/// Attitude setpoint from sticks: full deflection is the tilt limit. The
/// combined tilt is also capped at the limit.
pub fn stick_attitude(rc: &RcInput, yaw: f64) -> UnitQuaternion<f64> {
    let mut roll = rc.roll.clamp(-1.0, 1.0) * MAX_TILT_RAD;
    // stick forward pitches the nose down
    let mut pitch = -rc.pitch.clamp(-1.0, 1.0) * MAX_TILT_RAD;
    let q = UnitQuaternion::from_euler_angles(roll, pitch, 0.0);
    let tilt = q.angle();
    if tilt > MAX_TILT_RAD {
        let k = MAX_TILT_RAD / tilt;
        roll *= k;
        pitch *= k;
    }
    UnitQuaternion::from_euler_angles(0.0, 0.0, yaw)
        * UnitQuaternion::from_euler_angles(roll, pitch, 0.0)
}

/// Climb rate (positive up) from the throttle stick.
pub fn stick_climb_rate(rc: &RcInput, max_climb: f64, max_descent: f64) -> f64 {
    let s = deadband(rc.throttle * 2.0 - 1.0);
    if s >= 0.0 {
        s * max_climb
    } else {
        s * max_descent
    }
}
