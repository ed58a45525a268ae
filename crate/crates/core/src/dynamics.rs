//! 6-DOF hexacopter truth model.
//!
//! World frame is NED, body frame is FRD, thrust acts along body −z. The
//! attitude quaternion rotates body vectors into NED (`v_ned = q * v_body`).
//! Integration is semi-implicit Euler: velocities first, then positions with
//! the updated velocities.

use nalgebra::{Matrix4x6, SMatrix, UnitQuaternion, Vector3, Vector4, Vector6};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atmos::{prop_power, static_thrust, PowertrainSpec, GRAVITY};

pub const MOTORS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("integration fault at t+{dt} s: non-finite {what}")]
    NonFinite { what: &'static str, dt: f64 },
    #[error("time step {0} s outside (0, 0.01]")]
    BadTimeStep(f64),
}

/// Vehicle truth state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState {
    pub position_ned_m: Vector3<f64>,
    pub velocity_ned_mps: Vector3<f64>,
    /// Body-to-NED rotation.
    pub attitude_q: UnitQuaternion<f64>,
    /// Roll, pitch, yaw rates about body x, y, z.
    pub body_rates_radps: Vector3<f64>,
}

impl Default for RigidBodyState {
    fn default() -> Self {
        Self {
            position_ned_m: Vector3::zeros(),
            velocity_ned_mps: Vector3::zeros(),
            attitude_q: UnitQuaternion::identity(),
            body_rates_radps: Vector3::zeros(),
        }
    }
}

impl RigidBodyState {
    pub fn is_finite(&self) -> bool {
        self.position_ned_m.iter().all(|x| x.is_finite())
            && self.velocity_ned_mps.iter().all(|x| x.is_finite())
            && self.attitude_q.coords.iter().all(|x| x.is_finite())
            && self.body_rates_radps.iter().all(|x| x.is_finite())
    }

    /// Altitude above the origin, positive up.
    pub fn altitude_m(&self) -> f64 {
        -self.position_ned_m.z
    }
}

/// Rotor ring: six motors at azimuth 30° + 60°·i with alternating spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorBank {
    pub rpm: [f64; MOTORS],
    /// Sign of the reaction yaw torque each rotor applies to the body.
    pub spin_dir: [f64; MOTORS],
    pub azimuth_rad: [f64; MOTORS],
    pub arm_length_m: f64,
}

impl MotorBank {
    pub fn hexacopter(arm_length_m: f64) -> Self {
        let mut azimuth_rad = [0.0; MOTORS];
        let mut spin_dir = [0.0; MOTORS];
        for i in 0..MOTORS {
            azimuth_rad[i] = (30.0 + 60.0 * i as f64).to_radians();
            spin_dir[i] = if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        Self {
            rpm: [0.0; MOTORS],
            spin_dir,
            azimuth_rad,
            arm_length_m,
        }
    }

    /// Motor position in the body frame.
    pub fn position(&self, i: usize) -> Vector3<f64> {
        let a = self.azimuth_rad[i];
        Vector3::new(
            self.arm_length_m * a.cos(),
            self.arm_length_m * a.sin(),
            0.0,
        )
    }

    /// Maps per-motor thrusts (N) to (collective thrust, roll, pitch, yaw torque).
    pub fn allocation_matrix(&self, yaw_torque_ratio_m: f64) -> Matrix4x6<f64> {
        let mut a = Matrix4x6::zeros();
        for i in 0..MOTORS {
            let az = self.azimuth_rad[i];
            a[(0, i)] = 1.0;
            a[(1, i)] = -self.arm_length_m * az.sin();
            a[(2, i)] = self.arm_length_m * az.cos();
            a[(3, i)] = self.spin_dir[i] * yaw_torque_ratio_m;
        }
        a
    }
}

/// Collective thrust along body −z and body torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub thrust_n: f64,
    pub torque_nm: Vector3<f64>,
}

impl Wrench {
    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(
            self.thrust_n,
            self.torque_nm.x,
            self.torque_nm.y,
            self.torque_nm.z,
        )
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self {
            thrust_n: v[0],
            torque_nm: Vector3::new(v[1], v[2], v[3]),
        }
    }
}

/// Sums per-rotor thrust and torque. Roll and pitch torques come from the
/// lever arm `r × F`; yaw torque is the rotor drag reaction.
pub fn wrench_from_motors(
    bank: &MotorBank,
    spec: &PowertrainSpec,
    yaw_torque_ratio_m: f64,
    density: f64,
) -> Wrench {
    let mut thrust = 0.0;
    let mut torque = Vector3::zeros();
    for i in 0..MOTORS {
        let f = static_thrust(spec, bank.rpm[i].max(0.0), density);
        thrust += f;
        torque += bank.position(i).cross(&Vector3::new(0.0, 0.0, -f));
        torque.z += bank.spin_dir[i] * yaw_torque_ratio_m * f;
    }
    Wrench {
        thrust_n: thrust,
        torque_nm: torque,
    }
}

/// Per-cell open-circuit voltage breakpoints (state of charge, volts).
const OCV_CURVE: [(f64, f64); 3] = [(0.0, 3.3), (0.2, 3.7), (1.0, 4.2)];

pub fn cell_open_circuit_voltage(state_of_charge: f64) -> f64 {
    let soc = state_of_charge.clamp(0.0, 1.0);
    for w in OCV_CURVE.windows(2) {
        let (s0, v0) = w[0];
        let (s1, v1) = w[1];
        if soc <= s1 {
            return v0 + (v1 - v0) * (soc - s0) / (s1 - s0);
        }
    }
    OCV_CURVE[OCV_CURVE.len() - 1].1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub voltage_v: f64,
    pub consumed_mah: f64,
    pub internal_resistance_ohm: f64,
    pub capacity_mah: f64,
    pub cells: u32,
    pub current_a: f64,
}

impl BatteryState {
    pub fn full(cells: u32, capacity_mah: f64, internal_resistance_ohm: f64) -> Self {
        let mut b = Self {
            voltage_v: 0.0,
            consumed_mah: 0.0,
            internal_resistance_ohm,
            capacity_mah,
            cells,
            current_a: 0.0,
        };
        b.voltage_v = b.open_circuit_voltage();
        b
    }

    pub fn state_of_charge(&self) -> f64 {
        (1.0 - self.consumed_mah / self.capacity_mah).clamp(0.0, 1.0)
    }

    pub fn open_circuit_voltage(&self) -> f64 {
        f64::from(self.cells) * cell_open_circuit_voltage(self.state_of_charge())
    }

    pub fn cell_voltage(&self) -> f64 {
        self.voltage_v / f64::from(self.cells)
    }

    pub fn is_empty(&self) -> bool {
        self.consumed_mah >= self.capacity_mah
    }

    /// Current needed to deliver `power_w` at the sagging terminal voltage.
    pub fn current_for_power(&self, power_w: f64) -> f64 {
        let voc = self.open_circuit_voltage();
        let r = self.internal_resistance_ohm;
        if power_w <= 0.0 {
            return 0.0;
        }
        if r <= 0.0 {
            return power_w / voc;
        }
        let disc = voc * voc - 4.0 * r * power_w;
        if disc <= 0.0 {
            // beyond the pack's maximum power point
            voc / (2.0 * r)
        } else {
            (voc - disc.sqrt()) / (2.0 * r)
        }
    }
}

/// Integrates charge drawn and recomputes the loaded terminal voltage.
pub fn battery_step(battery: &BatteryState, current_a: f64, dt: f64) -> BatteryState {
    let current_a = current_a.max(0.0);
    let mut next = *battery;
    next.consumed_mah += current_a * dt * 1000.0 / 3600.0;
    next.current_a = current_a;
    next.voltage_v = next.open_circuit_voltage() - current_a * next.internal_resistance_ohm;
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindParams {
    pub mean_ned_mps: [f64; 3],
    /// Stationary standard deviation of the horizontal gust components.
    pub gust_sigma_mps: f64,
    /// Standard deviation of the vertical gust component.
    pub gust_sigma_vertical_mps: f64,
    pub correlation_time_s: f64,
    /// Cap on the total wind speed; 0 disables the cap.
    pub max_speed_mps: f64,
}

impl Default for WindParams {
    fn default() -> Self {
        Self::calm()
    }
}

impl WindParams {
    pub fn calm() -> Self {
        Self {
            mean_ned_mps: [0.0; 3],
            gust_sigma_mps: 0.0,
            gust_sigma_vertical_mps: 0.0,
            correlation_time_s: 2.0,
            max_speed_mps: 0.0,
        }
    }

    pub fn steady(mean_ned_mps: [f64; 3]) -> Self {
        let speed = Vector3::from(mean_ned_mps).norm();
        Self {
            mean_ned_mps,
            gust_sigma_mps: 0.0,
            gust_sigma_vertical_mps: 0.0,
            correlation_time_s: 2.0,
            max_speed_mps: speed,
        }
    }

    pub fn mean(&self) -> Vector3<f64> {
        Vector3::from(self.mean_ned_mps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindState {
    pub mean_ned_mps: Vector3<f64>,
    pub gust_ned_mps: Vector3<f64>,
}

impl WindState {
    pub fn velocity(&self) -> Vector3<f64> {
        self.mean_ned_mps + self.gust_ned_mps
    }
}

/// Advances the gust by one Ornstein–Uhlenbeck step around the mean.
pub fn wind_sample<R: Rng + ?Sized>(
    prev: &WindState,
    params: &WindParams,
    dt: f64,
    rng: &mut R,
) -> WindState {
    let tau = params.correlation_time_s.max(1e-6);
    let decay = (-dt / tau).exp();
    let scale = (1.0 - decay * decay).sqrt();
    let sigma = Vector3::new(
        params.gust_sigma_mps,
        params.gust_sigma_mps,
        params.gust_sigma_vertical_mps,
    );
    let mut gust = prev.gust_ned_mps * decay;
    for i in 0..3 {
        if sigma[i] > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            gust[i] += sigma[i] * scale * z;
        }
    }
    let mean = params.mean();
    let total = mean + gust;
    if params.max_speed_mps > 0.0 && total.norm() > params.max_speed_mps {
        gust = total * (params.max_speed_mps / total.norm()) - mean;
    }
    WindState {
        mean_ned_mps: mean,
        gust_ned_mps: gust,
    }
}

/// Physical parameters of the airframe beyond the powertrain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AirframeParams {
    pub inertia_kgm2: [f64; 3],
    pub arm_length_m: f64,
    /// Linear drag per body axis, N per m/s of air-relative velocity.
    pub drag_coeff: [f64; 3],
    /// Rotational damping, N·m per rad/s.
    pub angular_drag: f64,
    pub motor_time_constant_s: f64,
    pub yaw_torque_ratio_m: f64,
    pub battery_internal_resistance_ohm: f64,
}

impl Default for AirframeParams {
    fn default() -> Self {
        Self {
            inertia_kgm2: [0.029, 0.029, 0.055],
            arm_length_m: 0.275,
            drag_coeff: [0.3, 0.3, 0.5],
            angular_drag: 0.002,
            motor_time_constant_s: 0.05,
            yaw_torque_ratio_m: 0.016,
            battery_internal_resistance_ohm: 0.012,
        }
    }
}

/// Rigid-body model plus powertrain.
#[derive(Debug, Clone, PartialEq)]
pub struct Airframe {
    pub params: AirframeParams,
    pub powertrain: PowertrainSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    pub thrust_n: f64,
    pub torque_nm: Vector3<f64>,
    pub current_a: f64,
    /// Kinematic acceleration in NED.
    pub accel_ned_mps2: Vector3<f64>,
    pub air_velocity_body_mps: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub state: RigidBodyState,
    pub motors: MotorBank,
    pub battery: BatteryState,
    pub diagnostics: StepDiagnostics,
}

impl Airframe {
    pub fn new(params: AirframeParams, powertrain: PowertrainSpec) -> Self {
        Self { params, powertrain }
    }

    pub fn mass_kg(&self) -> f64 {
        self.powertrain.total_mass_kg
    }

    pub fn motor_bank(&self) -> MotorBank {
        MotorBank::hexacopter(self.params.arm_length_m)
    }

    pub fn full_battery(&self) -> BatteryState {
        BatteryState::full(
            self.powertrain.battery_cells,
            self.powertrain.capacity_mah,
            self.params.battery_internal_resistance_ohm,
        )
    }

    pub fn allocation_matrix(&self) -> Matrix4x6<f64> {
        self.motor_bank()
            .allocation_matrix(self.params.yaw_torque_ratio_m)
    }

    /// Maximum thrust of a single rotor.
    pub fn max_motor_thrust(&self, density: f64) -> f64 {
        static_thrust(&self.powertrain, self.powertrain.max_rpm, density)
    }

    pub fn inertia(&self) -> Vector3<f64> {
        Vector3::from(self.params.inertia_kgm2)
    }

    /// Advances the vehicle by `dt`. `motor_cmds` are normalized rpm commands.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        state: &RigidBodyState,
        motors: &MotorBank,
        motor_cmds: &[f64; MOTORS],
        battery: &BatteryState,
        wind: &WindState,
        density: f64,
        dt: f64,
    ) -> Result<StepOutput, DynamicsError> {
        if !(dt > 0.0 && dt <= 0.01) {
            return Err(DynamicsError::BadTimeStep(dt));
        }
        let p = &self.params;
        let mut bank = *motors;
        let alpha = 1.0 - (-dt / p.motor_time_constant_s.max(1e-9)).exp();
        for i in 0..MOTORS {
            let target = motor_cmds[i].clamp(0.0, 1.0) * self.powertrain.max_rpm;
            bank.rpm[i] += (target - bank.rpm[i]) * alpha;
        }
        let wrench = wrench_from_motors(&bank, &self.powertrain, p.yaw_torque_ratio_m, density);

        let q = state.attitude_q;
        let mass = self.mass_kg();
        let air_body = q.inverse_transform_vector(&(state.velocity_ned_mps - wind.velocity()));
        let drag_body = -Vector3::from(p.drag_coeff).component_mul(&air_body);
        let force_body = Vector3::new(0.0, 0.0, -wrench.thrust_n) + drag_body;
        let accel = q.transform_vector(&force_body) / mass + Vector3::new(0.0, 0.0, GRAVITY);

        let velocity = state.velocity_ned_mps + accel * dt;
        let position = state.position_ned_m + velocity * dt;

        let j = self.inertia();
        let w = state.body_rates_radps;
        let gyro = w.cross(&j.component_mul(&w));
        let ang_accel = (wrench.torque_nm - gyro - w * p.angular_drag).component_div(&j);
        let rates = w + ang_accel * dt;
        let attitude = UnitQuaternion::new_normalize(
            (q * UnitQuaternion::from_scaled_axis(rates * dt)).into_inner(),
        );

        let shaft: f64 = bank
            .rpm
            .iter()
            .map(|&rpm| prop_power(&self.powertrain, rpm.max(0.0), density))
            .sum();
        let current = battery.current_for_power(shaft / self.powertrain.drivetrain_efficiency);
        let battery = battery_step(battery, current, dt);

        let next = RigidBodyState {
            position_ned_m: position,
            velocity_ned_mps: velocity,
            attitude_q: attitude,
            body_rates_radps: rates,
        };
        if !next.is_finite() {
            return Err(DynamicsError::NonFinite { what: "state", dt });
        }
        Ok(StepOutput {
            state: next,
            motors: bank,
            battery,
            diagnostics: StepDiagnostics {
                thrust_n: wrench.thrust_n,
                torque_nm: wrench.torque_nm,
                current_a: current,
                accel_ned_mps2: accel,
                air_velocity_body_mps: air_body,
            },
        })
    }
}

/// Pseudo-inverse of a full-row-rank allocation matrix, `Aᵀ(AAᵀ)⁻¹`.
pub fn allocation_pseudo_inverse(a: &Matrix4x6<f64>) -> SMatrix<f64, 6, 4> {
    let aat = a * a.transpose();
    let inv = aat
        .try_inverse()
        .expect("allocation matrix has full row rank");
    a.transpose() * inv
}

/// Per-motor thrust vector for the given rpm values.
pub fn motor_thrusts(bank: &MotorBank, spec: &PowertrainSpec, density: f64) -> Vector6<f64> {
    Vector6::from_iterator(
        bank.rpm
            .iter()
            .map(|&r| static_thrust(spec, r.max(0.0), density)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atmos::{hover_point, SizingConfig};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn airframe() -> (Airframe, f64) {
        let cfg = SizingConfig::reference();
        let density = cfg.environment.air_density().unwrap();
        (
            Airframe::new(AirframeParams::default(), cfg.powertrain),
            density,
        )
    }

    #[test]
    fn equal_rpm_gives_zero_torque() {
        let (af, rho) = airframe();
        let mut bank = af.motor_bank();
        bank.rpm = [5000.0; MOTORS];
        let w = wrench_from_motors(&bank, &af.powertrain, 0.016, rho);
        assert!(w.torque_nm.x.abs() < 1e-12);
        assert!(w.torque_nm.y.abs() < 1e-12);
        assert_eq!(w.torque_nm.z, 0.0);
    }

    #[test]
    fn single_motor_yaw_sign() {
        let (af, rho) = airframe();
        for i in 0..MOTORS {
            let mut bank = af.motor_bank();
            bank.rpm[i] = 6000.0;
            let w = wrench_from_motors(&bank, &af.powertrain, 0.016, rho);
            assert!(w.torque_nm.z != 0.0);
            assert_eq!(w.torque_nm.z.signum(), bank.spin_dir[i]);
        }
    }

    #[test]
    fn spin_directions_alternate() {
        let bank = MotorBank::hexacopter(0.25);
        assert_eq!(bank.spin_dir.iter().filter(|&&s| s > 0.0).count(), 3);
        for i in 0..MOTORS {
            assert_eq!(bank.spin_dir[i], -bank.spin_dir[(i + 1) % MOTORS]);
        }
    }

    #[test]
    fn free_fall_one_step() {
        let (af, rho) = airframe();
        let out = af
            .step(
                &RigidBodyState::default(),
                &af.motor_bank(),
                &[0.0; MOTORS],
                &af.full_battery(),
                &WindState::default(),
                rho,
                0.01,
            )
            .unwrap();
        assert_relative_eq!(out.state.velocity_ned_mps.z, 0.0980665, epsilon = 1e-12);
    }

    #[test]
    fn bad_time_step_is_rejected() {
        let (af, rho) = airframe();
        let s = RigidBodyState::default();
        let b = af.full_battery();
        for dt in [0.0, -0.001, 0.02] {
            assert!(af
                .step(
                    &s,
                    &af.motor_bank(),
                    &[0.0; 6],
                    &b,
                    &WindState::default(),
                    rho,
                    dt
                )
                .is_err());
        }
    }

    #[test]
    fn non_finite_state_is_a_fault() {
        let (af, rho) = airframe();
        let mut s = RigidBodyState::default();
        s.velocity_ned_mps.x = f64::NAN;
        let r = af.step(
            &s,
            &af.motor_bank(),
            &[0.0; 6],
            &af.full_battery(),
            &WindState::default(),
            rho,
            0.002,
        );
        assert!(matches!(r, Err(DynamicsError::NonFinite { .. })));
    }

    #[test]
    fn hover_rpm_holds_position() {
        let cfg = SizingConfig::reference();
        let (af, rho) = airframe();
        let hover = hover_point(&cfg.powertrain, &cfg.environment).unwrap();
        let mut bank = af.motor_bank();
        bank.rpm = [hover.rpm; MOTORS];
        let cmds = [hover.rpm / af.powertrain.max_rpm; MOTORS];
        let mut state = RigidBodyState::default();
        let mut battery = af.full_battery();
        for _ in 0..500 {
            let out = af
                .step(
                    &state,
                    &bank,
                    &cmds,
                    &battery,
                    &WindState::default(),
                    rho,
                    0.002,
                )
                .unwrap();
            let drift = (out.state.position_ned_m - state.position_ned_m).norm();
            assert!(drift < 1e-6, "drift {drift}");
            state = out.state;
            bank = out.motors;
            battery = out.battery;
        }
    }

    #[test]
    fn quaternion_stays_normalized() {
        let (af, rho) = airframe();
        let mut state = RigidBodyState {
            body_rates_radps: Vector3::new(0.7, -0.3, 1.1),
            ..Default::default()
        };
        let bank = af.motor_bank();
        let battery = af.full_battery();
        let mut params = af.params.clone();
        params.angular_drag = 0.0;
        let af = Airframe::new(params, af.powertrain.clone());
        for _ in 0..100_000 {
            let out = af
                .step(
                    &state,
                    &bank,
                    &[0.0; 6],
                    &battery,
                    &WindState::default(),
                    rho,
                    0.002,
                )
                .unwrap();
            state = out.state;
            state.position_ned_m = Vector3::zeros();
            state.velocity_ned_mps = Vector3::zeros();
            assert!((state.attitude_q.coords.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn battery_examples() {
        let b = BatteryState::full(4, 5000.0, 0.012);
        let idle = battery_step(&b, 0.0, 10.0);
        assert_eq!(idle.consumed_mah, 0.0);
        assert_eq!(idle.voltage_v, b.open_circuit_voltage());

        let drained = battery_step(&b, 36.0, 100.0);
        assert_relative_eq!(drained.consumed_mah, 1000.0, epsilon = 1e-9);

        let loaded = battery_step(&b, 26.8, 1e-6);
        let sag = loaded.open_circuit_voltage() - loaded.voltage_v;
        assert_relative_eq!(sag, 26.8 * 0.012, epsilon = 1e-12);
        assert_relative_eq!(sag, 0.32, epsilon = 0.005);
    }

    #[test]
    fn voltage_drops_with_current_and_charge() {
        let b = BatteryState::full(4, 5000.0, 0.012);
        let mut prev = f64::INFINITY;
        for i in 0..10 {
            let v = battery_step(&b, f64::from(i) * 5.0, 0.01).voltage_v;
            assert!(v < prev);
            prev = v;
        }
        assert_relative_eq!(cell_open_circuit_voltage(1.0), 4.2);
        assert_relative_eq!(cell_open_circuit_voltage(0.2), 3.7);
        assert_relative_eq!(cell_open_circuit_voltage(0.0), 3.3);
    }

    #[test]
    fn zero_gust_wind_is_constant() {
        let params = WindParams::steady([2.0, -1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut w = WindState::default();
        for _ in 0..1000 {
            w = wind_sample(&w, &params, 0.002, &mut rng);
            assert_eq!(w.velocity(), Vector3::new(2.0, -1.0, 0.0));
        }
    }

    #[test]
    fn wind_is_seed_deterministic() {
        let params = WindParams {
            mean_ned_mps: [0.944, 0.0, 0.0],
            gust_sigma_mps: 0.6,
            gust_sigma_vertical_mps: 0.2,
            correlation_time_s: 2.0,
            max_speed_mps: 3.333,
        };
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut w = WindState::default();
            (0..1000)
                .map(|_| {
                    w = wind_sample(&w, &params, 0.01, &mut rng);
                    w.velocity()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }
}
