use hexaflight::control::FlightMode;
use hexaflight::runtime::{run_scenario, SimEvent};
use hexaflight::vision::{
    extract_centroid, gimbal_orientation, project_target, render_frame, CameraModel, CameraPose,
    RenderParams, BACKGROUND_LEVEL,
};
use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest distance between the analytic projection and the extracted
/// centroid over `n` random noiseless views of a ground disk.
pub fn projection_agreement(n: usize, seed: u64) -> (f64, usize) {
    let cam = CameraModel::default();
    let params = RenderParams {
        target_radius_m: 0.5,
        noise_sigma: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut used) = (0.0f64, 0);
    while used < n {
        let vehicle = UnitQuaternion::from_euler_angles(
            rng.gen_range(-0.2..0.2),
            rng.gen_range(-0.2..0.2),
            rng.gen_range(-3.1..3.1),
        );
        let pose = CameraPose::from_gimbal(
            Vector3::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                -rng.gen_range(4.0..15.0),
            ),
            &gimbal_orientation(&vehicle, 30.0),
        );
        let ahead = pose.camera_to_ned.transform_vector(&Vector3::z());
        // aim near the optical axis hit on the ground, then jitter
        let s = -pose.position_ned.z / ahead.z.max(0.2);
        let target = pose.position_ned
            + ahead * s
            + Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), 0.0);
        let target = Vector3::new(target.x, target.y, 0.0);
        let Some((c, r)) = project_target(&cam, &pose, &target, params.target_radius_m) else {
            continue;
        };
        if c.x < r + 2.0
            || c.y < r + 2.0
            || c.x > cam.width_px as f64 - r - 2.0
            || c.y > cam.height_px as f64 - r - 2.0
        {
            continue;
        }
        let frame = render_frame(&cam, &pose, &target, &params, used as u64, 0, &mut rng);
        let Some(m) = extract_centroid(&frame, BACKGROUND_LEVEL) else {
            continue;
        };
        worst = worst.max(((m.u - c.x).powi(2) + (m.v - c.y).powi(2)).sqrt());
        used += 1;
    }
    (worst, used)
}

#[derive(Debug)]
pub struct TrackReport {
    pub frames: usize,
    pub central_ratio: f64,
    pub min_range_m: f64,
    pub failsafes: usize,
    pub lost: usize,
}

/// Runs the shipped track scenario with `seed`. The ratio counts frames from
/// `settle_s` after Track engages; the range covers the whole Track phase.
pub fn track_metrics(seed: u64, settle_s: f64) -> TrackReport {
    let mut s = super::scenario("track");
    s.seed = Some(seed);
    let log = run_scenario(&s).unwrap();
    let engaged = log
        .vision
        .iter()
        .find(|v| v.mode == FlightMode::Track)
        .map(|v| v.t_us)
        .expect("track engaged");
    let from = engaged + (settle_s * 1e6) as u64;
    let window: Vec<_> = log.vision.iter().filter(|v| v.t_us >= from).collect();
    let central = window.iter().filter(|v| v.in_central).count();
    let min_range_m = log
        .vision
        .iter()
        .filter(|v| v.mode == FlightMode::Track)
        .map(|v| v.true_range_m)
        .fold(f64::INFINITY, f64::min);
    let lost = log
        .control_events()
        .filter(|(_, e)| matches!(e, hexaflight::control::ControlEvent::TrackLost))
        .count();
    let failsafes = log
        .events
        .iter()
        .filter(|e| {
            matches!(
                e.event,
                SimEvent::Control(hexaflight::control::ControlEvent::Failsafe(_))
            )
        })
        .count();
    TrackReport {
        frames: window.len(),
        central_ratio: central as f64 / window.len().max(1) as f64,
        min_range_m,
        failsafes,
        lost,
    }
}
