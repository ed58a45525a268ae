//! Simulated IMU, magnetometer, barometer and GPS.
//!
//! Every sampler is a pure function of (truth, parameters, rng state).

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::atmos::{air_pressure, pressure_altitude, GRAVITY, TROPOPAUSE_M};
use crate::dynamics::{MotorBank, RigidBodyState};

/// Minimum satellite count for a usable fix.
pub const MIN_FIX_SATELLITES: u32 = 6;
/// Satellite count at and above which horizontal accuracy is 1 m.
pub const FULL_ACCURACY_SATELLITES: u32 = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub accel_body_mps2: Vector3<f64>,
    pub gyro_body_radps: Vector3<f64>,
    pub timestamp_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsSample {
    pub position_ned_m: Vector3<f64>,
    pub velocity_ned_mps: Vector3<f64>,
    pub num_satellites: u32,
    pub h_accuracy_m: f64,
    pub fix_ok: bool,
    pub timestamp_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaroSample {
    pub pressure_pa: f64,
    pub derived_altitude_m: f64,
    pub timestamp_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagSample {
    pub field_body: Vector3<f64>,
    pub timestamp_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    pub accel_noise_std: f64,
    pub accel_bias: [f64; 3],
    pub gyro_noise_std: f64,
    pub gyro_bias: [f64; 3],
    /// Amplitude of the rotor-frequency vibration on the accelerometer, m/s².
    pub vibration_amplitude: f64,
    pub mag_noise_std: f64,
    pub mag_declination_deg: f64,
    pub baro_noise_std_pa: f64,
    pub gps_velocity_noise_std: f64,
    /// Vertical GPS error relative to horizontal.
    pub gps_vertical_ratio: f64,
    pub satellites: u32,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            accel_noise_std: 0.05,
            accel_bias: [0.0; 3],
            gyro_noise_std: 0.002,
            gyro_bias: [0.0; 3],
            vibration_amplitude: 0.3,
            mag_noise_std: 0.01,
            mag_declination_deg: 0.0,
            baro_noise_std_pa: 3.0,
            gps_velocity_noise_std: 0.1,
            gps_vertical_ratio: 1.5,
            satellites: 12,
        }
    }
}

impl NoiseParams {
    /// All noise, bias and vibration switched off.
    pub fn noiseless() -> Self {
        Self {
            accel_noise_std: 0.0,
            gyro_noise_std: 0.0,
            vibration_amplitude: 0.0,
            mag_noise_std: 0.0,
            baro_noise_std_pa: 0.0,
            gps_velocity_noise_std: 0.0,
            ..Self::default()
        }
    }
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R, sigma: Vector3<f64>) -> Vector3<f64> {
    let mut v = Vector3::zeros();
    for i in 0..3 {
        // always draw so the stream position does not depend on the sigma
        let z: f64 = rng.sample(StandardNormal);
        v[i] = sigma[i] * z;
    }
    v
}

/// Specific force of the motion `accel_ned` seen by a body-fixed accelerometer.
pub fn specific_force_body(state: &RigidBodyState, accel_ned: &Vector3<f64>) -> Vector3<f64> {
    state
        .attitude_q
        .inverse_transform_vector(&(accel_ned - Vector3::new(0.0, 0.0, GRAVITY)))
}

/// Mean rotor rotation frequency in Hz.
pub fn rotor_frequency_hz(motors: &MotorBank) -> f64 {
    motors.rpm.iter().sum::<f64>() / motors.rpm.len() as f64 / 60.0
}

pub fn sample_imu<R: Rng + ?Sized>(
    truth: &RigidBodyState,
    accel_ned: &Vector3<f64>,
    motors: &MotorBank,
    noise: &NoiseParams,
    timestamp_us: u64,
    rng: &mut R,
) -> ImuSample {
    let t = timestamp_us as f64 * 1e-6;
    let phase = 2.0 * std::f64::consts::PI * rotor_frequency_hz(motors) * t;
    let vib =
        noise.vibration_amplitude * Vector3::new(0.5 * phase.cos(), 0.5 * phase.sin(), phase.sin());
    let accel = specific_force_body(truth, accel_ned)
        + Vector3::from(noise.accel_bias)
        + vib
        + gaussian3(rng, Vector3::repeat(noise.accel_noise_std));
    let gyro = truth.body_rates_radps
        + Vector3::from(noise.gyro_bias)
        + gaussian3(rng, Vector3::repeat(noise.gyro_noise_std));
    ImuSample {
        accel_body_mps2: accel,
        gyro_body_radps: gyro,
        timestamp_us,
    }
}

/// Horizontal 1σ error for a satellite count, `None` without a fix.
pub fn gps_accuracy(satellites: u32) -> Option<f64> {
    if satellites >= FULL_ACCURACY_SATELLITES {
        Some(1.0)
    } else if satellites >= MIN_FIX_SATELLITES {
        let r = f64::from(FULL_ACCURACY_SATELLITES) / f64::from(satellites);
        Some(r * r)
    } else {
        None
    }
}

pub fn sample_gps<R: Rng + ?Sized>(
    truth: &RigidBodyState,
    satellites: u32,
    noise: &NoiseParams,
    timestamp_us: u64,
    rng: &mut R,
) -> GpsSample {
    let pos_noise = gaussian3(rng, Vector3::new(1.0, 1.0, noise.gps_vertical_ratio));
    let vel_noise = gaussian3(rng, Vector3::repeat(noise.gps_velocity_noise_std));
    match gps_accuracy(satellites) {
        Some(sigma) => GpsSample {
            position_ned_m: truth.position_ned_m + pos_noise * sigma,
            velocity_ned_mps: truth.velocity_ned_mps + vel_noise,
            num_satellites: satellites,
            h_accuracy_m: sigma,
            fix_ok: true,
            timestamp_us,
        },
        None => GpsSample {
            position_ned_m: Vector3::zeros(),
            velocity_ned_mps: Vector3::zeros(),
            num_satellites: satellites,
            h_accuracy_m: f64::INFINITY,
            fix_ok: false,
            timestamp_us,
        },
    }
}

/// `site_altitude_m` is the altitude of the local NED origin above sea level.
pub fn sample_baro<R: Rng + ?Sized>(
    truth: &RigidBodyState,
    site_altitude_m: f64,
    noise: &NoiseParams,
    timestamp_us: u64,
    rng: &mut R,
) -> BaroSample {
    let altitude = (site_altitude_m + truth.altitude_m()).clamp(0.0, TROPOPAUSE_M);
    let z: f64 = rng.sample(StandardNormal);
    let pressure =
        air_pressure(altitude).expect("altitude clamped into range") + noise.baro_noise_std_pa * z;
    BaroSample {
        pressure_pa: pressure,
        derived_altitude_m: pressure_altitude(pressure).unwrap_or(f64::NAN),
        timestamp_us,
    }
}

/// Unit horizontal earth field rotated by declination, in NED.
pub fn earth_field_ned(declination_deg: f64) -> Vector3<f64> {
    let d = declination_deg.to_radians();
    Vector3::new(d.cos(), d.sin(), 0.0)
}

pub fn sample_mag<R: Rng + ?Sized>(
    truth: &RigidBodyState,
    noise: &NoiseParams,
    timestamp_us: u64,
    rng: &mut R,
) -> MagSample {
    let field = truth
        .attitude_q
        .inverse_transform_vector(&earth_field_ned(noise.mag_declination_deg));
    MagSample {
        field_body: field + gaussian3(rng, Vector3::repeat(noise.mag_noise_std)),
        timestamp_us,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn level_hover_imu() {
        let s = sample_imu(
            &RigidBodyState::default(),
            &Vector3::zeros(),
            &MotorBank::hexacopter(0.25),
            &NoiseParams::noiseless(),
            0,
            &mut rng(),
        );
        assert_relative_eq!(
            s.accel_body_mps2,
            Vector3::new(0.0, 0.0, -GRAVITY),
            epsilon = 1e-12
        );
        assert_eq!(s.gyro_body_radps, Vector3::zeros());
    }

    #[test]
    fn gyro_bias_passes_through() {
        let noise = NoiseParams {
            gyro_bias: [0.01, 0.0, 0.0],
            ..NoiseParams::noiseless()
        };
        let s = sample_imu(
            &RigidBodyState::default(),
            &Vector3::zeros(),
            &MotorBank::hexacopter(0.25),
            &noise,
            0,
            &mut rng(),
        );
        assert_eq!(s.gyro_body_radps, Vector3::new(0.01, 0.0, 0.0));
    }

    #[test]
    fn gps_accuracy_mapping() {
        let truth = RigidBodyState::default();
        let s9 = sample_gps(&truth, 9, &NoiseParams::noiseless(), 0, &mut rng());
        assert!(s9.fix_ok);
        assert_eq!(s9.h_accuracy_m, 1.0);
        let s7 = sample_gps(&truth, 7, &NoiseParams::noiseless(), 0, &mut rng());
        assert!(s7.fix_ok);
        assert_relative_eq!(s7.h_accuracy_m, 1.653, epsilon = 1e-3);
        let s5 = sample_gps(&truth, 5, &NoiseParams::noiseless(), 0, &mut rng());
        assert!(!s5.fix_ok);
        for sats in 0..20 {
            let s = sample_gps(&truth, sats, &NoiseParams::noiseless(), 0, &mut rng());
            assert_eq!(s.fix_ok, sats >= 6);
        }
    }

    #[test]
    fn baro_reference_points() {
        let noise = NoiseParams::noiseless();
        let s = sample_baro(&RigidBodyState::default(), 0.0, &noise, 0, &mut rng());
        assert_relative_eq!(s.pressure_pa, 101_325.0, epsilon = 1e-9);
        let s = sample_baro(&RigidBodyState::default(), 2600.0, &noise, 0, &mut rng());
        assert_relative_eq!(s.pressure_pa, 73_750.0, epsilon = 2.0);
        for h in (0..=4000).step_by(100) {
            let mut truth = RigidBodyState::default();
            truth.position_ned_m.z = -f64::from(h);
            let s = sample_baro(&truth, 0.0, &noise, 0, &mut rng());
            assert!((s.derived_altitude_m - f64::from(h)).abs() < 1e-6);
        }
    }

    #[test]
    fn mag_orientation() {
        let noise = NoiseParams::noiseless();
        let s = sample_mag(&RigidBodyState::default(), &noise, 0, &mut rng());
        assert_relative_eq!(s.field_body, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
        let truth = RigidBodyState {
            attitude_q: UnitQuaternion::from_euler_angles(0.0, 0.0, 90f64.to_radians()),
            ..Default::default()
        };
        let s = sample_mag(&truth, &noise, 0, &mut rng());
        assert_relative_eq!(s.field_body, Vector3::new(0.0, -1.0, 0.0), epsilon = 1e-12);
        assert!((s.field_body.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn samplers_are_pure() {
        let truth = RigidBodyState::default();
        let noise = NoiseParams::default();
        let a = sample_gps(&truth, 12, &noise, 5, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_gps(&truth, 12, &noise, 5, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
