//! Hexacopter mixer: wrench → six normalized motor commands.
//!
//! Commands are normalized rotor speeds, so a command `c` produces thrust
//! `f_max · c²`. When the requested wrench cannot be produced inside the
//! motor box, yaw authority is given up first, then roll/pitch authority,
//! and collective thrust is kept whenever it is itself achievable.

use nalgebra::{Matrix4x6, SMatrix, Vector4, Vector6};

use crate::dynamics::{allocation_pseudo_inverse, Airframe, Wrench, MOTORS};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MixOutput {
    pub commands: [f64; MOTORS],
    /// Thrust each motor should produce, N.
    pub thrusts: [f64; MOTORS],
    pub saturated: bool,
    /// Fraction of requested yaw torque kept, 1 when unsaturated.
    pub yaw_scale: f64,
    /// Fraction of requested roll/pitch torque kept.
    pub roll_pitch_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mixer {
    allocation: Matrix4x6<f64>,
    pinv: SMatrix<f64, 6, 4>,
    max_motor_thrust_n: f64,
}

/// Largest `s` in [0, 1] with `base + s·dir` inside [0, max] componentwise.
/// Assumes `base` is already inside the box.
fn feasible_scale(base: &Vector6<f64>, dir: &Vector6<f64>, max: f64) -> f64 {
    let mut s: f64 = 1.0;
    for i in 0..MOTORS {
        let d = dir[i];
        if d > 0.0 {
            s = s.min((max - base[i]) / d);
        } else if d < 0.0 {
            s = s.min(-base[i] / d);
        }
    }
    s.clamp(0.0, 1.0)
}

fn inside(v: &Vector6<f64>, max: f64) -> bool {
    v.iter().all(|&f| f >= -1e-12 && f <= max + 1e-12)
}

impl Mixer {
    pub fn new(allocation: Matrix4x6<f64>, max_motor_thrust_n: f64) -> Self {
        Self {
            pinv: allocation_pseudo_inverse(&allocation),
            allocation,
            max_motor_thrust_n,
        }
    }

    pub fn for_airframe(airframe: &Airframe, density: f64) -> Self {
        Self::new(
            airframe.allocation_matrix(),
            airframe.max_motor_thrust(density),
        )
    }

    pub fn allocation(&self) -> &Matrix4x6<f64> {
        &self.allocation
    }

    pub fn max_motor_thrust(&self) -> f64 {
        self.max_motor_thrust_n
    }

    pub fn max_total_thrust(&self) -> f64 {
        self.max_motor_thrust_n * MOTORS as f64
    }

    pub fn mix(&self, wrench: &Wrench) -> MixOutput {
        let max = self.max_motor_thrust_n;
        let w = wrench.as_vector();
        let collective = self.pinv * Vector4::new(w[0], 0.0, 0.0, 0.0);
        let roll_pitch = self.pinv * Vector4::new(0.0, w[1], w[2], 0.0);
        let yaw = self.pinv * Vector4::new(0.0, 0.0, 0.0, w[3]);

        let mut yaw_scale = 1.0;
        let mut rp_scale = 1.0;
        let full = collective + roll_pitch + yaw;
        let thrusts = if inside(&full, max) {
            full
        } else {
            let attitude = collective + roll_pitch;
            if inside(&attitude, max) {
                yaw_scale = feasible_scale(&attitude, &yaw, max);
                attitude + yaw * yaw_scale
            } else {
                yaw_scale = 0.0;
                let base = collective.map(|f| f.clamp(0.0, max));
                rp_scale = feasible_scale(&base, &roll_pitch, max);
                base + roll_pitch * rp_scale
            }
        };
        let thrusts = thrusts.map(|f| f.clamp(0.0, max));

        let mut out = MixOutput {
            saturated: yaw_scale < 1.0 || rp_scale < 1.0 || !inside(&full, max),
            yaw_scale,
            roll_pitch_scale: rp_scale,
            ..Default::default()
        };
        for i in 0..MOTORS {
            out.thrusts[i] = thrusts[i];
            out.commands[i] = if max > 0.0 {
                (thrusts[i] / max).sqrt()
            } else {
                0.0
            };
        }
        out
    }

    /// Wrench produced by a set of normalized commands.
    pub fn wrench_of(&self, commands: &[f64; MOTORS]) -> Wrench {
        let f = Vector6::from_iterator(commands.iter().map(|c| self.max_motor_thrust_n * c * c));
        Wrench::from_vector(&(self.allocation * f))
    }
}
