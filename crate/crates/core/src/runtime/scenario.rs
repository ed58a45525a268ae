//! Scenario files: TOML describing the world, the vehicle, the operator
//! script and the run parameters.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::atmos::{Environment, PowertrainSpec, SizingConfig};
use crate::bus::LinkConfig;
use crate::control::{ControllerConfig, Mission, RcInput};
use crate::dynamics::{AirframeParams, WindParams};
use crate::estimator::EstimatorGains;
use crate::sensors::NoiseParams;
use crate::vision::{
    CameraModel, GimbalMode, GroundTarget, GuidanceParams, RenderParams, TrackerConfig,
};

use super::RuntimeError;

/// Default tlog epoch: 2024-01-01T00:00:00Z in microseconds.
pub const DEFAULT_EPOCH_US: u64 = 1_704_067_200_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rates {
    pub physics_hz: u32,
    pub control_hz: u32,
    pub vision_hz: u32,
    pub telemetry_hz: u32,
    pub heartbeat_hz: u32,
    pub gps_hz: u32,
    pub baro_hz: u32,
    pub mag_hz: u32,
    pub truth_hz: u32,
    /// Downsampled frames streamed to clients; 0 disables.
    pub vision_stream_hz: u32,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            physics_hz: 500,
            control_hz: 250,
            vision_hz: 30,
            telemetry_hz: 10,
            heartbeat_hz: 1,
            gps_hz: 10,
            baro_hz: 50,
            mag_hz: 50,
            truth_hz: 50,
            vision_stream_hz: 0,
        }
    }
}

impl Rates {
    pub fn validate(&self) -> Result<(), String> {
        let p = self.physics_hz;
        if p == 0 || p > 2000 {
            return Err("physics_hz must be in 1..=2000".into());
        }
        let exact = [
            ("control_hz", self.control_hz),
            ("telemetry_hz", self.telemetry_hz),
            ("heartbeat_hz", self.heartbeat_hz),
            ("gps_hz", self.gps_hz),
            ("baro_hz", self.baro_hz),
            ("mag_hz", self.mag_hz),
            ("truth_hz", self.truth_hz),
        ];
        for (name, r) in exact {
            if r == 0 || p % r != 0 {
                return Err(format!(
                    "{name} = {r} must be nonzero and divide physics_hz = {p}"
                ));
            }
        }
        if self.control_hz < self.gps_hz
            || self.control_hz < self.baro_hz
            || self.control_hz < self.mag_hz
        {
            return Err("sensor rates must not exceed control_hz".into());
        }
        // vision runs on a fractional schedule and need not divide physics
        if self.vision_hz == 0 || self.vision_hz > p || self.vision_stream_hz > p {
            return Err("vision rates must be in 1..=physics_hz".into());
        }
        if 1.0 / p as f64 > 0.01 {
            return Err("physics step must be at most 10 ms".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSpec {
    /// `"reference"` or a sizing config path relative to the scenario file.
    pub config: String,
    pub powertrain: Option<PowertrainSpec>,
    pub airframe: AirframeParams,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        Self {
            config: "reference".into(),
            powertrain: None,
            airframe: AirframeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Links {
    pub uplink: LinkConfig,
    pub downlink: LinkConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedGcs {
    /// Whether the scripted operator exists at all. Served runs disable it.
    pub enabled: bool,
    pub heartbeat_hz: f64,
    pub rc_hz: f64,
}

impl Default for ScriptedGcs {
    fn default() -> Self {
        Self {
            enabled: true,
            heartbeat_hz: 1.0,
            rc_hz: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptAction {
    Arm,
    Disarm,
    Takeoff {
        #[serde(default)]
        altitude_m: Option<f64>,
    },
    Land,
    Rtl,
    MissionStart,
    SetMode {
        mode: String,
    },
    FailsafeReset,
    /// Uploads the scenario mission.
    UploadMission,
    /// Starts streaming stick positions until the next `rc` or `rc_release`.
    Rc {
        #[serde(default)]
        roll: f64,
        #[serde(default)]
        pitch: f64,
        #[serde(default)]
        yaw: f64,
        #[serde(default = "half")]
        throttle: f64,
    },
    /// Sends centered sticks once and stops streaming.
    RcRelease,
    /// The scripted operator goes quiet: no heartbeats, no sticks.
    Silence,
    /// Heartbeats resume.
    Resume,
}

fn half() -> f64 {
    0.5
}

impl ScriptAction {
    pub fn rc(&self) -> Option<RcInput> {
        match *self {
            Self::Rc {
                roll,
                pitch,
                yaw,
                throttle,
            } => Some(RcInput {
                roll,
                pitch,
                yaw,
                throttle,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub at_s: f64,
    #[serde(flatten)]
    pub action: ScriptAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteChange {
    pub at_s: f64,
    pub satellites: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    pub position_ned: [f64; 3],
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisionConfig {
    pub camera: CameraModel,
    pub gimbal: GimbalMode,
    pub render: RenderParams,
    pub tracker: TrackerConfig,
    pub guidance: GuidanceParams,
}

impl Default for VisionConfig {
    fn default() -> Self {
        Self {
            camera: CameraModel::default(),
            gimbal: GimbalMode::TwoAxis,
            render: RenderParams::default(),
            tracker: TrackerConfig::default(),
            guidance: GuidanceParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: Option<u64>,
    pub duration_s: f64,
    pub epoch_us: u64,
    pub rates: Rates,
    pub environment: Environment,
    pub vehicle: VehicleSpec,
    pub initial: InitialState,
    pub sensors: NoiseParams,
    pub satellite_schedule: Vec<SatelliteChange>,
    pub wind: WindParams,
    pub estimator: EstimatorGains,
    pub controller: ControllerConfig,
    pub mission: Option<Mission>,
    pub target: Option<GroundTarget>,
    pub vision: VisionConfig,
    pub obstacles: Vec<[f64; 3]>,
    pub links: Links,
    pub gcs: ScriptedGcs,
    pub script: Vec<ScriptEntry>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for Scenario {
    fn default() -> Self {
        let reference = SizingConfig::reference();
        Self {
            name: "unnamed".into(),
            seed: None,
            duration_s: 10.0,
            epoch_us: DEFAULT_EPOCH_US,
            rates: Rates::default(),
            environment: reference.environment,
            vehicle: VehicleSpec::default(),
            initial: InitialState::default(),
            sensors: NoiseParams::default(),
            satellite_schedule: Vec::new(),
            wind: WindParams::calm(),
            estimator: EstimatorGains::default(),
            controller: ControllerConfig::default(),
            mission: None,
            target: None,
            vision: VisionConfig::default(),
            obstacles: Vec::new(),
            links: Links::default(),
            gcs: ScriptedGcs::default(),
            script: Vec::new(),
            base_dir: None,
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, RuntimeError> {
        toml::from_str(text).map_err(|e| RuntimeError::Scenario(format!("parse error: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RuntimeError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| RuntimeError::Scenario(format!("cannot read {}: {e}", path.display())))?;
        let mut s = Self::from_toml(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    /// Vehicle powertrain, resolving the referenced sizing config.
    pub fn powertrain(&self) -> Result<PowertrainSpec, RuntimeError> {
        if let Some(p) = &self.vehicle.powertrain {
            return Ok(p.clone());
        }
        if self.vehicle.config == "reference" {
            return Ok(SizingConfig::reference().powertrain);
        }
        let path = match &self.base_dir {
            Some(dir) => dir.join(&self.vehicle.config),
            None => PathBuf::from(&self.vehicle.config),
        };
        SizingConfig::load(&path)
            .map(|c| c.powertrain)
            .map_err(|e| RuntimeError::Scenario(format!("vehicle config {}: {e}", path.display())))
    }

    pub fn home(&self) -> Vector3<f64> {
        Vector3::from(self.initial.position_ned)
    }

    /// Checks everything that can be checked before the run starts.
    pub fn validate(&self) -> Result<(), RuntimeError> {
        let err = |m: String| Err(RuntimeError::Scenario(m));
        if self.seed.is_none() {
            return err("scenario seed is mandatory (set `seed` or pass --seed)".into());
        }
        if !(self.duration_s > 0.0 && self.duration_s <= 24.0 * 3600.0) {
            return err(format!(
                "duration_s {} must be in (0, 86400]",
                self.duration_s
            ));
        }
        self.rates.validate().map_err(RuntimeError::Scenario)?;
        self.environment
            .validate()
            .map_err(|e| RuntimeError::Scenario(format!("environment: {e}")))?;
        self.powertrain()?
            .validate()
            .map_err(|e| RuntimeError::Scenario(format!("powertrain: {e}")))?;
        self.controller
            .limits
            .validate()
            .map_err(|e| RuntimeError::Scenario(format!("safety limits: {e}")))?;
        if self.initial.position_ned[2] != 0.0 {
            return err("vehicle must start on the ground (initial down = 0)".into());
        }
        if let Some(m) = &self.mission {
            m.validate(&self.controller.limits, &self.home())
                .map_err(|e| RuntimeError::Scenario(format!("mission: {e}")))?;
        }
        if let Some(t) = &self.target {
            t.validate()
                .map_err(|e| RuntimeError::Scenario(format!("target: {e}")))?;
        }
        self.vision
            .camera
            .validate()
            .map_err(RuntimeError::Scenario)?;
        self.links
            .uplink
            .validate()
            .map_err(|e| RuntimeError::Scenario(format!("uplink: {e}")))?;
        self.links
            .downlink
            .validate()
            .map_err(|e| RuntimeError::Scenario(format!("downlink: {e}")))?;
        for s in &self.script {
            if !(s.at_s >= 0.0 && s.at_s.is_finite()) {
                return err(format!("script time {} must be non-negative", s.at_s));
            }
            if let ScriptAction::SetMode { mode } = &s.action {
                if super::gcs::parse_mode(mode).is_none() {
                    return err(format!("unknown flight mode {mode:?}"));
                }
            }
            if matches!(s.action, ScriptAction::UploadMission) && self.mission.is_none() {
                return err("upload_mission scripted but no mission defined".into());
            }
        }
        Ok(())
    }
}
