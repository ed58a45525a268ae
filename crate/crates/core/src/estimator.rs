//! Navigation estimator: an explicit complementary attitude filter with gyro
//! bias estimation, plus complementary position/velocity filters blending
//! barometer and GPS with accelerometer dead reckoning.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::atmos::GRAVITY;
use crate::sensors::{earth_field_ned, BaroSample, GpsSample, ImuSample, MagSample};

/// Accelerometer tilt correction is skipped outside this band around 1 g.
const ACCEL_GATE: f64 = 0.2;
/// Bias learning pauses while the correction error exceeds this (≈ 5°).
const BIAS_LEARN_MAX_ERROR: f64 = 0.087;
/// Smoothing applied to the GPS-differenced acceleration, per fix.
const GPS_ACCEL_SMOOTHING: f64 = 0.3;
/// Gyro bias estimates are clamped to this magnitude per axis, rad/s.
const MAX_GYRO_BIAS: f64 = 0.2;
/// Batches older than this mark the estimate degraded.
pub const STALE_AFTER_US: u64 = 500_000;
/// Horizontal solution is dropped after this long without a GPS fix.
pub const GPS_EXPIRY_US: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorGains {
    pub kp: f64,
    pub ki: f64,
    pub kp_mag: f64,
    /// Crossover of the barometric altitude filter, Hz.
    pub vertical_crossover_hz: f64,
    /// Per-sample GPS position gain.
    pub gps_position_gain: f64,
    /// Per-sample GPS velocity gain.
    pub gps_velocity_gain: f64,
    /// Per-sample horizontal accelerometer bias gain.
    pub gps_bias_gain: f64,
}

impl Default for EstimatorGains {
    fn default() -> Self {
        Self {
            kp: 1.0,
            ki: 0.1,
            kp_mag: 0.5,
            vertical_crossover_hz: 0.5,
            gps_position_gain: 0.03,
            gps_velocity_gain: 0.5,
            gps_bias_gain: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ValidFlags {
    pub attitude: bool,
    pub vertical: bool,
    pub horizontal: bool,
}

/// Published navigation solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavEstimate {
    pub attitude_q: UnitQuaternion<f64>,
    pub position_ned_m: Vector3<f64>,
    pub velocity_ned_mps: Vector3<f64>,
    pub gyro_bias_radps: Vector3<f64>,
    /// Bias-corrected body rates from the last IMU sample.
    pub body_rates_radps: Vector3<f64>,
    pub valid: ValidFlags,
    pub degraded: bool,
    pub timestamp_us: u64,
    /// Microseconds since the last IMU sample was consumed.
    pub imu_age_us: u64,
    pub gps_age_us: u64,
}

impl Default for NavEstimate {
    fn default() -> Self {
        Self {
            attitude_q: UnitQuaternion::identity(),
            position_ned_m: Vector3::zeros(),
            velocity_ned_mps: Vector3::zeros(),
            gyro_bias_radps: Vector3::zeros(),
            body_rates_radps: Vector3::zeros(),
            valid: ValidFlags::default(),
            degraded: false,
            timestamp_us: 0,
            imu_age_us: 0,
            gps_age_us: u64::MAX,
        }
    }
}

impl NavEstimate {
    pub fn is_usable(&self) -> bool {
        self.valid.attitude && !self.degraded
    }

    pub fn horizontal_ok(&self) -> bool {
        self.is_usable() && self.valid.horizontal
    }
}

/// Sensor samples gathered since the previous estimator step, in time order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensorBatch {
    pub imu: Vec<ImuSample>,
    pub mag: Option<MagSample>,
    pub baro: Option<BaroSample>,
    pub gps: Option<GpsSample>,
}

impl SensorBatch {
    pub fn is_empty(&self) -> bool {
        self.imu.is_empty() && self.mag.is_none() && self.baro.is_none() && self.gps.is_none()
    }

    pub fn latest_timestamp(&self) -> Option<u64> {
        let imu = self.imu.last().map(|s| s.timestamp_us);
        [
            imu,
            self.mag.map(|s| s.timestamp_us),
            self.baro.map(|s| s.timestamp_us),
            self.gps.map(|s| s.timestamp_us),
        ]
        .into_iter()
        .flatten()
        .max()
    }
}

/// Owns the filter state behind a [`NavEstimate`].
#[derive(Debug, Clone)]
pub struct Estimator {
    pub gains: EstimatorGains,
    pub declination_deg: f64,
    /// Altitude of the local origin above sea level, subtracted from baro.
    pub site_altitude_m: f64,
    estimate: NavEstimate,
    vertical_accel_bias: f64,
    horizontal_accel_bias: Vector3<f64>,
    last_accel_ned: Vector3<f64>,
    last_baro_us: Option<u64>,
    /// Horizontal acceleration from successive GPS velocities, removed from
    /// the accelerometer before it is used as a gravity reference.
    gps_accel_ned: Vector3<f64>,
    last_gps_velocity: Option<(u64, Vector3<f64>)>,
}

impl Estimator {
    pub fn new(gains: EstimatorGains, site_altitude_m: f64, declination_deg: f64) -> Self {
        Self {
            gains,
            declination_deg,
            site_altitude_m,
            estimate: NavEstimate::default(),
            vertical_accel_bias: 0.0,
            horizontal_accel_bias: Vector3::zeros(),
            last_accel_ned: Vector3::zeros(),
            last_baro_us: None,
            gps_accel_ned: Vector3::zeros(),
            last_gps_velocity: None,
        }
    }

    pub fn estimate(&self) -> &NavEstimate {
        &self.estimate
    }

    /// Overwrites the solution, e.g. to seed a known initial state.
    pub fn set_estimate(&mut self, estimate: NavEstimate) {
        self.estimate = estimate;
    }

    /// Aligns attitude from a static accelerometer and magnetometer reading.
    pub fn align(&mut self, imu: &ImuSample, mag: &MagSample) {
        let up_body = -imu.accel_body_mps2.normalize();
        let roll = up_body.y.atan2(up_body.z);
        let pitch = (-up_body.x).atan2((up_body.y * up_body.y + up_body.z * up_body.z).sqrt());
        let tilt = UnitQuaternion::from_euler_angles(roll, pitch, 0.0);
        let m = tilt.transform_vector(&mag.field_body);
        let heading = m.y.atan2(m.x);
        let yaw = self.declination_deg.to_radians() - heading;
        self.estimate.attitude_q = UnitQuaternion::from_euler_angles(roll, pitch, yaw);
        self.estimate.valid.attitude = true;
    }

    /// One complementary-filter attitude step.
    pub fn attitude_update(&mut self, imu: &ImuSample, mag: Option<&MagSample>, dt: f64) {
        debug_assert!(dt > 0.0);
        let g = &self.gains;
        let est = &mut self.estimate;
        let q = est.attitude_q;
        let mut correction = Vector3::zeros();
        let mut error = Vector3::zeros();

        // expected specific force, NED, pointing up
        let up_ned = Vector3::new(0.0, 0.0, GRAVITY) - self.gps_accel_ned;
        let expected = up_ned.norm();
        let a_norm = imu.accel_body_mps2.norm();
        if a_norm > 0.0 && ((a_norm - expected) / expected).abs() <= ACCEL_GATE {
            let measured_down = -imu.accel_body_mps2 / a_norm;
            let estimated_down = q.inverse_transform_vector(&(up_ned / expected));
            let e = measured_down.cross(&estimated_down);
            correction += g.kp * e;
            error += e;
        }

        if let Some(mag) = mag {
            let m_world = q.transform_vector(&mag.field_body);
            let m_h = Vector3::new(m_world.x, m_world.y, 0.0);
            if m_h.norm() > 1e-6 {
                let reference = earth_field_ned(self.declination_deg);
                // heading error only, about world down
                let e_world = Vector3::new(0.0, 0.0, m_h.normalize().cross(&reference).z);
                let e = q.inverse_transform_vector(&e_world);
                correction += g.kp_mag * e;
                error += e;
            }
        }

        if error.norm() < BIAS_LEARN_MAX_ERROR {
            est.gyro_bias_radps -= g.ki * error * dt;
            est.gyro_bias_radps = est
                .gyro_bias_radps
                .map(|b| b.clamp(-MAX_GYRO_BIAS, MAX_GYRO_BIAS));
        }
        let rates = imu.gyro_body_radps - est.gyro_bias_radps;
        est.body_rates_radps = rates;
        let omega = rates + correction;
        est.attitude_q = UnitQuaternion::new_normalize(
            (q * UnitQuaternion::from_scaled_axis(omega * dt)).into_inner(),
        );
        est.valid.attitude = true;
    }

    /// Dead-reckons with the accelerometer and blends baro and GPS fixes.
    pub fn position_update(
        &mut self,
        gps: Option<&GpsSample>,
        baro: Option<&BaroSample>,
        imu: Option<&ImuSample>,
        dt: f64,
    ) {
        debug_assert!(dt > 0.0);
        let omega = 2.0 * std::f64::consts::PI * self.gains.vertical_crossover_hz;
        let est = &mut self.estimate;

        if let Some(imu) = imu {
            self.last_accel_ned = est.attitude_q.transform_vector(&imu.accel_body_mps2)
                + Vector3::new(0.0, 0.0, GRAVITY);
        }
        let mut accel = self.last_accel_ned - self.horizontal_accel_bias;
        accel.z = self.last_accel_ned.z - self.vertical_accel_bias;

        est.velocity_ned_mps += accel * dt;
        est.position_ned_m += est.velocity_ned_mps * dt;

        if let Some(baro) = baro {
            if baro.derived_altitude_m.is_finite() {
                let z_meas = -(baro.derived_altitude_m - self.site_altitude_m);
                if est.valid.vertical {
                    let err = z_meas - est.position_ned_m.z;
                    let (k1, k2, k3) = (3.0 * omega, 3.0 * omega * omega, omega.powi(3));
                    let period = self
                        .last_baro_us
                        .map(|t| baro.timestamp_us.saturating_sub(t) as f64 * 1e-6)
                        .unwrap_or(dt)
                        .clamp(dt, 0.1);
                    est.position_ned_m.z += k1 * err * period;
                    est.velocity_ned_mps.z += k2 * err * period;
                    self.vertical_accel_bias -= k3 * err * period;
                } else {
                    est.position_ned_m.z = z_meas;
                    est.velocity_ned_mps.z = 0.0;
                    est.valid.vertical = true;
                }
                self.last_baro_us = Some(baro.timestamp_us);
            }
        }

        if let Some(gps) = gps {
            if gps.fix_ok {
                let v = Vector3::new(gps.velocity_ned_mps.x, gps.velocity_ned_mps.y, 0.0);
                if let Some((t_prev, v_prev)) = self.last_gps_velocity {
                    let span = gps.timestamp_us.saturating_sub(t_prev) as f64 * 1e-6;
                    if span > 0.0 && span < 0.5 {
                        let a = (v - v_prev) / span;
                        self.gps_accel_ned += GPS_ACCEL_SMOOTHING * (a - self.gps_accel_ned);
                    } else {
                        self.gps_accel_ned = Vector3::zeros();
                    }
                }
                self.last_gps_velocity = Some((gps.timestamp_us, v));
                let g = &self.gains;
                if est.valid.horizontal {
                    let dp = gps.position_ned_m - est.position_ned_m;
                    let dv = gps.velocity_ned_mps - est.velocity_ned_mps;
                    for i in 0..2 {
                        est.position_ned_m[i] += g.gps_position_gain * dp[i];
                        est.velocity_ned_mps[i] += g.gps_velocity_gain * dv[i];
                        self.horizontal_accel_bias[i] -= g.gps_bias_gain * dv[i];
                    }
                } else {
                    est.position_ned_m.x = gps.position_ned_m.x;
                    est.position_ned_m.y = gps.position_ned_m.y;
                    est.velocity_ned_mps.x = gps.velocity_ned_mps.x;
                    est.velocity_ned_mps.y = gps.velocity_ned_mps.y;
                    est.valid.horizontal = true;
                }
                est.gps_age_us = 0;
            }
        }
    }

    /// Consumes one batch: attitude then position per IMU sample, with the
    /// slow sensors applied on the last IMU sample of the batch.
    pub fn step(&mut self, batch: &SensorBatch, now_us: u64) -> NavEstimate {
        let since = now_us.saturating_sub(self.estimate.timestamp_us);
        if batch.imu.is_empty() {
            self.estimate.imu_age_us = self.estimate.imu_age_us.saturating_add(since);
            self.estimate.gps_age_us = self.estimate.gps_age_us.saturating_add(since);
            self.estimate.timestamp_us = now_us;
            if self.estimate.imu_age_us > STALE_AFTER_US {
                self.estimate.degraded = true;
            }
            return self.estimate;
        }
        let n = batch.imu.len();
        for (i, imu) in batch.imu.iter().enumerate() {
            let prev = self.estimate.timestamp_us;
            let dt = if imu.timestamp_us > prev && prev > 0 {
                (imu.timestamp_us - prev) as f64 * 1e-6
            } else {
                0.002
            };
            let last = i + 1 == n;
            let mag = if last { batch.mag.as_ref() } else { None };
            self.attitude_update(imu, mag, dt);
            let baro = if last { batch.baro.as_ref() } else { None };
            let gps = if last { batch.gps.as_ref() } else { None };
            self.position_update(gps, baro, Some(imu), dt);
            let gps_fresh = gps.map(|g| g.fix_ok).unwrap_or(false);
            if !gps_fresh {
                self.estimate.gps_age_us = self
                    .estimate
                    .gps_age_us
                    .saturating_add(imu.timestamp_us.saturating_sub(prev));
            }
            self.estimate.timestamp_us = imu.timestamp_us;
        }
        let newest = batch.latest_timestamp().unwrap_or(now_us);
        self.estimate.imu_age_us = now_us.saturating_sub(newest);
        self.estimate.degraded = self.estimate.imu_age_us > STALE_AFTER_US;
        if self.estimate.gps_age_us > STALE_AFTER_US {
            self.gps_accel_ned = Vector3::zeros();
        }
        if self.estimate.gps_age_us > GPS_EXPIRY_US {
            // dead reckoning no longer trusted; the next fix re-seeds position
            self.estimate.valid.horizontal = false;
        }
        self.estimate
    }
}

/// Angle between two attitudes in radians.
pub fn attitude_error_rad(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    a.angle_to(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn level_imu(t: u64) -> ImuSample {
        ImuSample {
            accel_body_mps2: Vector3::new(0.0, 0.0, -GRAVITY),
            gyro_body_radps: Vector3::zeros(),
            timestamp_us: t,
        }
    }

    fn north_mag(t: u64) -> MagSample {
        MagSample {
            field_body: Vector3::x(),
            timestamp_us: t,
        }
    }

    #[test]
    fn identity_stays_identity() {
        let mut est = Estimator::new(EstimatorGains::default(), 0.0, 0.0);
        for i in 1..=1000 {
            est.attitude_update(&level_imu(i * 2000), Some(&north_mag(i * 2000)), 0.002);
        }
        assert!(
            attitude_error_rad(&est.estimate().attitude_q, &UnitQuaternion::identity()) < 1e-12
        );
    }

    #[test]
    fn flags_start_false() {
        let est = Estimator::new(EstimatorGains::default(), 0.0, 0.0);
        let e = est.estimate();
        assert!(!e.valid.attitude && !e.valid.vertical && !e.valid.horizontal);
    }

    #[test]
    fn tilt_converges_from_thirty_degrees() {
        let mut est = Estimator::new(EstimatorGains::default(), 0.0, 0.0);
        let mut start = NavEstimate::default();
        start.attitude_q =
            UnitQuaternion::from_euler_angles(30f64.to_radians(), -10f64.to_radians(), 0.0);
        est.set_estimate(start);
        for i in 1..=2500 {
            est.attitude_update(&level_imu(i * 2000), Some(&north_mag(i * 2000)), 0.002);
        }
        let err = attitude_error_rad(&est.estimate().attitude_q, &UnitQuaternion::identity());
        assert!(err.to_degrees() < 1.0, "error {} deg", err.to_degrees());
    }

    #[test]
    fn accel_gate_skips_dynamic_maneuvers() {
        let mut est = Estimator::new(
            EstimatorGains {
                kp_mag: 0.0,
                ..Default::default()
            },
            0.0,
            0.0,
        );
        let mut start = NavEstimate::default();
        start.attitude_q = UnitQuaternion::from_euler_angles(0.2, 0.0, 0.0);
        est.set_estimate(start);
        let imu = ImuSample {
            accel_body_mps2: Vector3::new(0.0, 0.0, -1.5 * GRAVITY),
            gyro_body_radps: Vector3::zeros(),
            timestamp_us: 0,
        };
        est.attitude_update(&imu, None, 0.002);
        assert_relative_eq!(est.estimate().attitude_q, start.attitude_q, epsilon = 1e-15);
    }

    #[test]
    fn empty_batch_only_ages() {
        let mut est = Estimator::new(EstimatorGains::default(), 0.0, 0.0);
        let before = *est.estimate();
        let after = est.step(&SensorBatch::default(), 100_000);
        assert_eq!(after.attitude_q, before.attitude_q);
        assert_eq!(after.position_ned_m, before.position_ned_m);
        assert_eq!(after.imu_age_us, 100_000);
        assert!(!after.degraded);
        let after = est.step(&SensorBatch::default(), 700_000);
        assert!(after.degraded);
    }

    #[test]
    fn align_recovers_heading() {
        let truth = UnitQuaternion::from_euler_angles(0.1, -0.05, 1.2);
        let imu = ImuSample {
            accel_body_mps2: truth.inverse_transform_vector(&Vector3::new(0.0, 0.0, -GRAVITY)),
            gyro_body_radps: Vector3::zeros(),
            timestamp_us: 0,
        };
        let mag = MagSample {
            field_body: truth.inverse_transform_vector(&Vector3::x()),
            timestamp_us: 0,
        };
        let mut est = Estimator::new(EstimatorGains::default(), 0.0, 0.0);
        est.align(&imu, &mag);
        assert!(attitude_error_rad(&est.estimate().attitude_q, &truth) < 1e-9);
    }
}
