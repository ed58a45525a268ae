#![allow(dead_code)]

pub mod bus;
pub mod dynamics;
pub mod proto;
pub mod runtime;
pub mod sensing;
pub mod vision;

use std::path::PathBuf;

use hexaflight::runtime::{Scenario, SessionLog, TruthSample};
use nalgebra::Vector3;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(rel)
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::load(fixture(&format!("scenarios/{name}.toml"))).expect("shipped scenario parses")
}

/// Hover statistics over the samples at or after `from_s`.
pub struct HoverStats {
    pub mean: Vector3<f64>,
    /// RMS distance from the mean position.
    pub std: f64,
    /// Largest distance from the mean position.
    pub max_excursion: f64,
}

pub fn hover_stats(log: &SessionLog, from_s: f64) -> HoverStats {
    let settled: Vec<&TruthSample> = log.truth.iter().filter(|s| s.t_s() >= from_s).collect();
    assert!(!settled.is_empty(), "no samples after {from_s} s");
    let n = settled.len() as f64;
    let mean = settled
        .iter()
        .map(|s| s.position_ned_m)
        .sum::<Vector3<f64>>()
        / n;
    let d: Vec<f64> = settled
        .iter()
        .map(|s| (s.position_ned_m - mean).norm())
        .collect();
    HoverStats {
        mean,
        std: (d.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
        max_excursion: d.iter().cloned().fold(0.0, f64::max),
    }
}

/// Angle between body z and the local vertical.
pub fn tilt(s: &TruthSample) -> f64 {
    let z = s.attitude_q.transform_vector(&Vector3::z());
    z.z.clamp(-1.0, 1.0).acos()
}
