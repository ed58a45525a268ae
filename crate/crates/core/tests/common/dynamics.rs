use hexaflight::atmos::{air_density, SizingConfig};
use hexaflight::control::{AttitudeController, AttitudeGains, Mixer};
use hexaflight::dynamics::{Airframe, AirframeParams, RigidBodyState, WindState, Wrench, MOTORS};
use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Standard atmosphere from the pressure and temperature profiles and the
// ideal gas law, written out separately from the library.
pub fn isa_density(h: f64) -> f64 {
    let (t0, p0, l, r, g) = (288.15, 101_325.0, 0.0065, 287.052_87, 9.806_65);
    let t = t0 - l * h;
    let p = p0 * (t / t0).powf(g / (r * l));
    p / (r * t)
}

// Hover energy balance: shaft power from the propeller power law at the
// thrust that carries the weight, divided into usable pack energy.
pub fn endurance_oracle(cfg: &SizingConfig) -> f64 {
    let p = &cfg.powertrain;
    let rho = isa_density(cfg.environment.altitude_m);
    let per_prop = p.total_mass_kg * 9.806_65 / 6.0;
    let n = (per_prop / (p.thrust_coeff * rho * p.prop_diameter_m.powi(4))).sqrt();
    let shaft = 6.0 * p.power_coeff * rho * p.prop_diameter_m.powi(5) * n.powi(3);
    let energy_wh = p.battery_cells as f64 * p.cell_voltage_nominal_v * p.capacity_mah / 1000.0
        * p.usable_capacity_fraction;
    energy_wh / (shaft / p.drivetrain_efficiency) * 60.0
}

pub fn airframe() -> Airframe {
    Airframe::new(
        AirframeParams::default(),
        SizingConfig::reference().powertrain,
    )
}

pub fn mixer() -> Mixer {
    Mixer::for_airframe(&airframe(), air_density(2600.0, 0.0).unwrap())
}

fn hover_command(af: &Airframe, rho: f64) -> f64 {
    (af.mass_kg() * 9.806_65 / 6.0 / af.max_motor_thrust(rho)).sqrt()
}

/// Fixed hover throttle from a 1° roll: the vehicle slides off sideways.
pub fn open_loop_drift_10s() -> f64 {
    let af = airframe();
    let rho = air_density(0.0, 0.0).unwrap();
    let c = hover_command(&af, rho);
    let mut state = RigidBodyState {
        attitude_q: UnitQuaternion::from_euler_angles(1f64.to_radians(), 0.0, 0.0),
        ..Default::default()
    };
    let mut motors = af.motor_bank();
    motors.rpm = [c * af.powertrain.max_rpm; MOTORS];
    let mut battery = af.full_battery();
    let dt = 0.002;
    for _ in 0..5000 {
        let out = af
            .step(
                &state,
                &motors,
                &[c; MOTORS],
                &battery,
                &WindState::default(),
                rho,
                dt,
            )
            .unwrap();
        state = out.state;
        motors = out.motors;
        battery = out.battery;
    }
    state.position_ned_m.xy().norm()
}

/// Fraction of 10³ random unsaturated wrenches the mixer reproduces to 1e-9 relative.
pub fn mixer_reconstruction(seed: u64) -> (usize, usize, f64) {
    let m = mixer();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hover = 6.0 * 0.5 * m.max_motor_thrust();
    let (mut tried, mut ok, mut worst) = (0, 0, 0.0f64);
    while tried < 1000 {
        let w = Wrench {
            thrust_n: hover * rng.gen_range(0.6..1.4),
            torque_nm: Vector3::new(
                rng.gen_range(-0.8..0.8),
                rng.gen_range(-0.8..0.8),
                rng.gen_range(-0.1..0.1),
            ),
        };
        let out = m.mix(&w);
        if out.saturated {
            continue;
        }
        tried += 1;
        let back = m.wrench_of(&out.commands).as_vector();
        let err = (back - w.as_vector()).norm() / w.as_vector().norm();
        worst = worst.max(err);
        if err < 1e-9 {
            ok += 1;
        }
    }
    (ok, tried, worst)
}

/// Closed attitude loop on the rigid body with truth feedback. Returns
/// (overshoot fraction, 5 % settling time in s) for a roll step.
pub fn roll_step_response(step_deg: f64) -> (f64, f64) {
    let af = airframe();
    let rho = air_density(2600.0, 0.0).unwrap();
    let m = Mixer::for_airframe(&af, rho);
    let mut ctl = AttitudeController::new(AttitudeGains::default(), af.inertia());
    let weight = af.mass_kg() * 9.806_65;
    let c0 = (weight / 6.0 / m.max_motor_thrust()).sqrt();
    let mut state = RigidBodyState::default();
    let mut motors = af.motor_bank();
    motors.rpm = [c0 * af.powertrain.max_rpm; MOTORS];
    let mut battery = af.full_battery();
    let target = step_deg.to_radians();
    let sp = UnitQuaternion::from_euler_angles(target, 0.0, 0.0);
    let dt = 0.002;
    let mut cmds = [c0; MOTORS];
    let (mut peak, mut settled_at) = (0.0f64, 0.0);
    for k in 0..1500 {
        if k % 2 == 0 {
            let torque = ctl.update(&state.attitude_q, &state.body_rates_radps, &sp, 0.004);
            cmds = m
                .mix(&Wrench {
                    thrust_n: weight,
                    torque_nm: torque,
                })
                .commands;
        }
        let out = af
            .step(
                &state,
                &motors,
                &cmds,
                &battery,
                &WindState::default(),
                rho,
                dt,
            )
            .unwrap();
        state = out.state;
        motors = out.motors;
        battery = out.battery;
        let roll = state.attitude_q.euler_angles().0;
        peak = peak.max(roll);
        if (roll - target).abs() > 0.05 * target {
            settled_at = (k + 1) as f64 * dt;
        }
    }
    ((peak - target) / target, settled_at)
}
