//! Waypoint missions.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::failsafe::SafetyLimits;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position_ned: [f64; 3],
    #[serde(default)]
    pub hold_s: f64,
    #[serde(default = "default_acceptance")]
    pub acceptance_radius_m: f64,
}

fn default_acceptance() -> f64 {
    1.0
}

impl Waypoint {
    pub fn new(position_ned: Vector3<f64>, hold_s: f64, acceptance_radius_m: f64) -> Self {
        Self {
            position_ned: position_ned.into(),
            hold_s,
            acceptance_radius_m,
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::from(self.position_ned)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MissionError {
    Empty,
    OutsideGeofence { index: usize },
    BadWaypoint { index: usize },
}

impl std::fmt::Display for MissionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Empty => write!(f, "mission has no waypoints"),
            Self::OutsideGeofence { index } => {
                write!(f, "waypoint {index} lies outside the geofence")
            }
            Self::BadWaypoint { index } => write!(f, "waypoint {index} has invalid parameters"),
        }
    }
}

impl std::error::Error for MissionError {}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Mission {
    pub waypoints: Vec<Waypoint>,
}

impl Mission {
    pub fn new(waypoints: Vec<Waypoint>) -> Self {
        Self { waypoints }
    }

    pub fn validate(&self, limits: &SafetyLimits, home: &Vector3<f64>) -> Result<(), MissionError> {
        if self.waypoints.is_empty() {
            return Err(MissionError::Empty);
        }
        for (index, wp) in self.waypoints.iter().enumerate() {
            let finite = wp.position_ned.iter().all(|x| x.is_finite());
            if !finite || wp.hold_s < 0.0 || !(wp.acceptance_radius_m > 0.0) {
                return Err(MissionError::BadWaypoint { index });
            }
            if !limits.inside_geofence(home, &wp.position()) {
                return Err(MissionError::OutsideGeofence { index });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MissionProgress {
    pub index: usize,
    pub hold_elapsed_s: f64,
    pub complete: bool,
}

/// Target position for the current waypoint and the updated progress.
/// Completion leaves the vehicle loitering at the final waypoint.
pub fn mission_step(
    position: &Vector3<f64>,
    mission: &Mission,
    progress: &MissionProgress,
    dt: f64,
) -> (Vector3<f64>, MissionProgress) {
    let mut p = *progress;
    let last = mission.waypoints.len().saturating_sub(1);
    if p.complete || mission.waypoints.is_empty() {
        let target = mission
            .waypoints
            .get(last)
            .map(Waypoint::position)
            .unwrap_or(*position);
        return (target, p);
    }
    let wp = mission.waypoints[p.index.min(last)];
    if (position - wp.position()).norm() <= wp.acceptance_radius_m {
        if p.hold_elapsed_s >= wp.hold_s {
            if p.index >= last {
                p.complete = true;
            } else {
                p.index += 1;
                p.hold_elapsed_s = 0.0;
            }
        } else {
            p.hold_elapsed_s += dt;
        }
    } else {
        p.hold_elapsed_s = 0.0;
    }
    let target = mission.waypoints[p.index.min(last)].position();
    (target, p)
}
