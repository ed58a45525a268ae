//! Safety monitor: geofence, battery, link loss, target and obstacle standoff.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyLimits {
    pub geofence_horizontal_m: f64,
    pub geofence_vertical_m: f64,
    pub min_target_standoff_m: f64,
    pub min_obstacle_standoff_m: f64,
    pub battery_land_voltage_per_cell: f64,
    pub link_timeout_s: f64,
}

impl Default for SafetyLimits {
    fn default() -> Self {
        Self {
            geofence_horizontal_m: 200.0,
            geofence_vertical_m: 100.0,
            min_target_standoff_m: 10.0,
            min_obstacle_standoff_m: 5.0,
            battery_land_voltage_per_cell: 3.4,
            link_timeout_s: 3.0,
        }
    }
}

impl SafetyLimits {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.geofence_horizontal_m,
            self.geofence_vertical_m,
            self.min_target_standoff_m,
            self.min_obstacle_standoff_m,
            self.battery_land_voltage_per_cell,
            self.link_timeout_s,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err("all safety limits must be positive".into());
        }
        if self.min_target_standoff_m >= self.geofence_horizontal_m
            || self.min_obstacle_standoff_m >= self.geofence_horizontal_m
        {
            return Err("standoff distances must be smaller than the geofence".into());
        }
        Ok(())
    }

    /// Whether `position` (NED, relative to `home`) lies inside the fence.
    pub fn inside_geofence(&self, home: &Vector3<f64>, position: &Vector3<f64>) -> bool {
        let d = position - home;
        d.xy().norm() <= self.geofence_horizontal_m && -d.z <= self.geofence_vertical_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailsafeReason {
    Geofence,
    BatteryLow,
    LinkLost,
    TargetTooClose,
    ObstacleTooClose,
    EstimatorInvalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SafetyAction {
    None,
    ReturnToLaunch(FailsafeReason),
    Land(FailsafeReason),
    /// Move away from `from` until at least `distance_m` away. Not latched.
    BackOff {
        reason: FailsafeReason,
        from: [f64; 3],
        distance_m: f64,
    },
}

impl SafetyAction {
    /// Wire code used in SYS_STATUS.failsafe.
    pub fn code(&self) -> u8 {
        match self {
            Self::None => 0,
            Self::ReturnToLaunch(_) => 1,
            Self::Land(_) => 2,
            Self::BackOff { .. } => 3,
        }
    }

    fn severity(&self) -> u8 {
        match self {
            Self::None => 0,
            Self::BackOff { .. } => 1,
            Self::ReturnToLaunch(_) => 2,
            Self::Land(_) => 3,
        }
    }

    pub fn reason(&self) -> Option<FailsafeReason> {
        match *self {
            Self::None => None,
            Self::ReturnToLaunch(r) | Self::Land(r) => Some(r),
            Self::BackOff { reason, .. } => Some(reason),
        }
    }

    /// Same action and reason, ignoring where a back-off points.
    pub fn same_kind(&self, other: &SafetyAction) -> bool {
        self.code() == other.code() && self.reason() == other.reason()
    }

    pub fn is_latching(&self) -> bool {
        matches!(self, Self::ReturnToLaunch(_) | Self::Land(_))
    }
}

/// Inputs gathered for one safety evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyInputs<'a> {
    pub position_ned_m: Vector3<f64>,
    pub home_ned_m: Vector3<f64>,
    pub estimate_valid: bool,
    pub cell_voltage_v: f64,
    /// `None` while no operator link is being supervised.
    pub link_age_s: Option<f64>,
    /// Slant range to the target while tracking.
    pub target_range_m: Option<f64>,
    pub target_position_ned_m: Option<Vector3<f64>>,
    pub obstacles_ned_m: &'a [Vector3<f64>],
}

/// Latches RTL and Land until an operator reset. A more severe action may
/// replace a latched one (Land overrides RTL), never the reverse.
#[derive(Debug, Clone, Default)]
pub struct FailsafeMonitor {
    latched: Option<SafetyAction>,
}

impl FailsafeMonitor {
    pub fn latched(&self) -> Option<SafetyAction> {
        self.latched
    }

    pub fn reset(&mut self) {
        self.latched = None;
    }

    /// Evaluates the raw conditions without touching the latch.
    pub fn evaluate(inputs: &SafetyInputs<'_>, limits: &SafetyLimits) -> SafetyAction {
        if inputs.cell_voltage_v < limits.battery_land_voltage_per_cell {
            return SafetyAction::Land(FailsafeReason::BatteryLow);
        }
        if !inputs.estimate_valid {
            return SafetyAction::Land(FailsafeReason::EstimatorInvalid);
        }
        if !limits.inside_geofence(&inputs.home_ned_m, &inputs.position_ned_m) {
            return SafetyAction::ReturnToLaunch(FailsafeReason::Geofence);
        }
        if let Some(age) = inputs.link_age_s {
            if age > limits.link_timeout_s {
                return SafetyAction::ReturnToLaunch(FailsafeReason::LinkLost);
            }
        }
        if let (Some(range), Some(target)) = (inputs.target_range_m, inputs.target_position_ned_m) {
            if range < limits.min_target_standoff_m {
                return SafetyAction::BackOff {
                    reason: FailsafeReason::TargetTooClose,
                    from: target.into(),
                    distance_m: limits.min_target_standoff_m,
                };
            }
        }
        for obstacle in inputs.obstacles_ned_m {
            if (inputs.position_ned_m - obstacle).norm() < limits.min_obstacle_standoff_m {
                return SafetyAction::BackOff {
                    reason: FailsafeReason::ObstacleTooClose,
                    from: (*obstacle).into(),
                    distance_m: limits.min_obstacle_standoff_m,
                };
            }
        }
        SafetyAction::None
    }

    /// Evaluates and applies latching; returns the action in force.
    pub fn check(&mut self, inputs: &SafetyInputs<'_>, limits: &SafetyLimits) -> SafetyAction {
        let raw = Self::evaluate(inputs, limits);
        match self.latched {
            Some(latched) => {
                if raw.is_latching() && raw.severity() > latched.severity() {
                    self.latched = Some(raw);
                }
                self.latched.unwrap()
            }
            None => {
                if raw.is_latching() {
                    self.latched = Some(raw);
                }
                raw
            }
        }
    }
}
