use hexaflight::dynamics::RigidBodyState;
use hexaflight::sensors::{sample_gps, NoiseParams};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-axis sample standard deviation of `n` GPS fixes of a stationary vehicle.
pub fn gps_sigma(n: usize, satellites: u32, seed: u64) -> [f64; 3] {
    let truth = RigidBodyState {
        position_ned_m: Vector3::new(12.0, -4.0, -30.0),
        ..Default::default()
    };
    let noise = NoiseParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = Vector3::zeros();
    let mut sq = Vector3::zeros();
    for i in 0..n {
        let g = sample_gps(&truth, satellites, &noise, i as u64 * 100_000, &mut rng);
        let e = g.position_ned_m - truth.position_ned_m;
        sum += e;
        sq += e.component_mul(&e);
    }
    let n = n as f64;
    let mean = sum / n;
    let var = (sq - mean.component_mul(&mean) * n) / (n - 1.0);
    [var.x.sqrt(), var.y.sqrt(), var.z.sqrt()]
}
