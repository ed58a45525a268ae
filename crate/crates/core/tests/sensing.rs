mod common;

use std::f64::consts::PI;

use common::sensing::gps_sigma;
use hexaflight::atmos::pressure_altitude;
use hexaflight::dynamics::{MotorBank, RigidBodyState};
use hexaflight::runtime::run_scenario;
use hexaflight::sensors::{
    gps_accuracy, rotor_frequency_hz, sample_baro, sample_gps, sample_imu, NoiseParams,
    FULL_ACCURACY_SATELLITES,
};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn gps_horizontal_sigma_is_one_meter() {
    let s = gps_sigma(100_000, FULL_ACCURACY_SATELLITES, 17);
    assert!((s[0] - 1.0).abs() < 0.03, "north {}", s[0]);
    assert!((s[1] - 1.0).abs() < 0.03, "east {}", s[1]);
    assert!(
        (s[2] - NoiseParams::default().gps_vertical_ratio).abs() < 0.05,
        "down {}",
        s[2]
    );
}

#[test]
fn gps_degrades_with_fewer_satellites() {
    assert_eq!(gps_accuracy(12), Some(1.0));
    assert_eq!(gps_accuracy(9), Some(1.0));
    let a7 = gps_accuracy(7).unwrap();
    assert!((a7 - (9.0f64 / 7.0).powi(2)).abs() < 1e-12);
    assert_eq!(gps_accuracy(5), None);
    let s = gps_sigma(20_000, 6, 2);
    assert!((s[0] - 2.25).abs() < 0.1, "{}", s[0]);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = sample_gps(
        &RigidBodyState::default(),
        4,
        &NoiseParams::default(),
        0,
        &mut rng,
    );
    assert!(!g.fix_ok);
}

fn dft_peak(x: &[f64], rate_hz: f64) -> f64 {
    let n = x.len();
    let (mut best, mut best_f) = (0.0, 0.0);
    for k in 1..n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let a = 2.0 * PI * (k * i) as f64 / n as f64;
            re += v * a.cos();
            im -= v * a.sin();
        }
        let p = re * re + im * im;
        if p > best {
            best = p;
            best_f = k as f64 * rate_hz / n as f64;
        }
    }
    best_f
}

#[test]
fn vibration_sits_at_rotor_frequency() {
    let mut motors = MotorBank::hexacopter(0.275);
    motors.rpm = [4800.0; 6];
    let f_rotor = rotor_frequency_hz(&motors);
    assert_eq!(f_rotor, 80.0);
    let noise = NoiseParams {
        vibration_amplitude: 0.5,
        ..NoiseParams::noiseless()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let truth = RigidBodyState::default();
    let up = Vector3::new(0.0, 0.0, 0.0);
    let rate = 1000.0;
    let z: Vec<f64> = (0..1000)
        .map(|i| {
            sample_imu(&truth, &up, &motors, &noise, i * 1000, &mut rng)
                .accel_body_mps2
                .z
        })
        .collect();
    assert_eq!(dft_peak(&z, rate), f_rotor);
}

#[test]
fn baro_inverts_to_altitude() {
    let truth = RigidBodyState {
        position_ned_m: Vector3::new(0.0, 0.0, -50.0),
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b = sample_baro(&truth, 2600.0, &NoiseParams::noiseless(), 0, &mut rng);
    assert!((pressure_altitude(b.pressure_pa).unwrap() - 2650.0).abs() < 1e-6);
}

#[test]
fn estimate_tracks_truth_in_hover() {
    let log = run_scenario(&common::scenario("calm_hover")).unwrap();
    let errs: Vec<f64> = log
        .truth
        .iter()
        .filter(|t| t.t_s() > 15.0)
        .map(|t| (t.estimate_position_ned_m - t.position_ned_m).norm())
        .collect();
    let rms = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    assert!(rms < 2.0, "estimate rms error {rms}");
}
