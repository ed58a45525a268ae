//! Flight modes, cascaded controllers, mixer, waypoint navigation and the
//! safety monitor, tied together by [`FlightController`].

pub mod attitude;
pub mod failsafe;
pub mod manual;
pub mod mission;
pub mod mixer;
pub mod position;

use std::fmt;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub use attitude::{tilt_angle, AttitudeController, AttitudeGains};
pub use failsafe::{FailsafeMonitor, FailsafeReason, SafetyAction, SafetyInputs, SafetyLimits};
pub use manual::RcInput;
pub use mission::{mission_step, Mission, MissionError, MissionProgress, Waypoint};
pub use mixer::{MixOutput, Mixer};
pub use position::{
    attitude_from_body_z, PositionController, PositionGains, ThrustSetpoint, MAX_TILT_RAD,
};

use crate::dynamics::{Wrench, MOTORS};
use crate::estimator::NavEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlightMode {
    Disarmed,
    Manual,
    AltitudeHold,
    PositionHold,
    AutoMission,
    Track,
    ReturnToLaunch,
    Land,
}

impl FlightMode {
    pub const ALL: [FlightMode; 8] = [
        Self::Disarmed,
        Self::Manual,
        Self::AltitudeHold,
        Self::PositionHold,
        Self::AutoMission,
        Self::Track,
        Self::ReturnToLaunch,
        Self::Land,
    ];

    /// Value carried in HEARTBEAT.custom_mode and SET_MODE.custom_mode.
    pub fn to_custom_mode(self) -> u32 {
        self as u32
    }

    pub fn from_custom_mode(v: u32) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }

    pub fn is_armed(self) -> bool {
        self != Self::Disarmed
    }

    /// Modes flown by the position loop.
    pub fn needs_horizontal_fix(self) -> bool {
        matches!(self, Self::PositionHold | Self::AutoMission | Self::Track)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Disarmed => "DISARMED",
            Self::Manual => "MANUAL",
            Self::AltitudeHold => "ALTHOLD",
            Self::PositionHold => "POSHOLD",
            Self::AutoMission => "AUTO",
            Self::Track => "TRACK",
            Self::ReturnToLaunch => "RTL",
            Self::Land => "LAND",
        }
    }
}

impl fmt::Display for FlightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What the outer loops hand to the inner loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setpoint {
    Idle,
    Attitude {
        attitude_q: UnitQuaternion<f64>,
        thrust: f64,
    },
    Velocity {
        velocity_ned: Vector3<f64>,
        yaw: f64,
    },
    Position {
        position_ned: Vector3<f64>,
        yaw: f64,
    },
}

/// Conditions a mode request is judged against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModeContext {
    pub vision_locked: bool,
    pub mission_valid: bool,
    pub horizontal_ok: bool,
    pub landed: bool,
    pub failsafe_latched: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    NotArmed,
    AlreadyArmed,
    NotLanded,
    NoVisionLock,
    NoMission,
    NoPositionFix,
    FailsafeActive,
    Mission(MissionError),
    Unsupported,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotArmed => write!(f, "vehicle is not armed"),
            Self::AlreadyArmed => write!(f, "vehicle is already armed"),
            Self::NotLanded => write!(f, "vehicle is not landed"),
            Self::NoVisionLock => write!(f, "no vision lock"),
            Self::NoMission => write!(f, "no valid mission"),
            Self::NoPositionFix => write!(f, "no horizontal position fix"),
            Self::FailsafeActive => write!(f, "failsafe active, reset required"),
            Self::Mission(e) => write!(f, "mission rejected: {e}"),
            Self::Unsupported => write!(f, "unsupported command"),
        }
    }
}

impl std::error::Error for Rejection {}

/// Whether a SET_MODE request from `from` to `to` is allowed.
pub fn mode_transition(
    from: FlightMode,
    to: FlightMode,
    ctx: &ModeContext,
) -> Result<(), Rejection> {
    use FlightMode::*;
    if ctx.failsafe_latched && from != to {
        return Err(Rejection::FailsafeActive);
    }
    if from == to {
        return Ok(());
    }
    match (from, to) {
        (Disarmed, _) => Err(Rejection::NotArmed),
        (_, Disarmed) if !ctx.landed => Err(Rejection::NotLanded),
        (_, Disarmed) => Ok(()),
        (_, ReturnToLaunch | Land | Manual | AltitudeHold) => Ok(()),
        (_, Track) if !ctx.vision_locked => Err(Rejection::NoVisionLock),
        (_, AutoMission) if !ctx.mission_valid => Err(Rejection::NoMission),
        (_, PositionHold | AutoMission | Track) if !ctx.horizontal_ok => {
            Err(Rejection::NoPositionFix)
        }
        _ => Ok(()),
    }
}

/// Operator commands after decoding from the wire.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Arm,
    Disarm,
    Takeoff { altitude_m: Option<f64> },
    Land,
    ReturnToLaunch,
    MissionStart,
    SetMode(FlightMode),
    FailsafeReset,
    UploadMission(Mission),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlEvent {
    ModeChanged { from: FlightMode, to: FlightMode },
    Failsafe(SafetyAction),
    FailsafeCleared,
    Rejected { command: String, reason: Rejection },
    MissionAccepted { waypoints: usize },
    MissionComplete,
    TrackLost,
    Landed,
    EstimateInvalid,
}

impl fmt::Display for ControlEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ModeChanged { from, to } => write!(f, "mode {from} -> {to}"),
            Self::Failsafe(a) => write!(f, "failsafe {a:?}"),
            Self::FailsafeCleared => write!(f, "failsafe reset"),
            Self::Rejected { command, reason } => write!(f, "rejected {command}: {reason}"),
            Self::MissionAccepted { waypoints } => {
                write!(f, "mission accepted ({waypoints} waypoints)")
            }
            Self::MissionComplete => write!(f, "mission complete"),
            Self::TrackLost => write!(f, "track lost"),
            Self::Landed => write!(f, "landed"),
            Self::EstimateInvalid => write!(f, "estimate invalid"),
        }
    }
}

/// Vision guidance output handed to the controller in Track mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackInput {
    pub locked: bool,
    pub velocity_sp_ned: Vector3<f64>,
    pub yaw_sp: f64,
    pub range_m: f64,
    pub target_position_ned: Vector3<f64>,
}

/// Everything the controller reads each cycle.
#[derive(Debug, Clone, Copy)]
pub struct ControlInputs<'a> {
    pub estimate: &'a NavEstimate,
    pub cell_voltage_v: f64,
    /// Age of the operator link, `None` if not supervised.
    pub link_age_s: Option<f64>,
    pub rc: Option<RcInput>,
    pub track: Option<TrackInput>,
    pub obstacles_ned_m: &'a [Vector3<f64>],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub attitude: AttitudeGains,
    pub position: PositionGains,
    pub limits: SafetyLimits,
    pub takeoff_altitude_m: f64,
    pub rtl_altitude_m: f64,
    pub land_speed_mps: f64,
    pub max_yaw_rate_radps: f64,
    pub back_off_speed_mps: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            attitude: AttitudeGains::default(),
            position: PositionGains::default(),
            limits: SafetyLimits::default(),
            takeoff_altitude_m: 10.0,
            rtl_altitude_m: 15.0,
            land_speed_mps: 0.7,
            max_yaw_rate_radps: 1.0,
            back_off_speed_mps: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RtlPhase {
    Climb,
    Return,
}

/// Seconds of near-zero climb rate near the ground before declaring landed.
const LANDED_DWELL_S: f64 = 1.0;
const LANDED_HEIGHT_M: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub commands: [f64; MOTORS],
    pub setpoint: Setpoint,
    pub torque_nm: Vector3<f64>,
    pub thrust_fraction: f64,
    pub attitude_sp: UnitQuaternion<f64>,
    pub saturated: bool,
    pub action: SafetyAction,
}

impl ControlOutput {
    fn idle() -> Self {
        Self {
            commands: [0.0; MOTORS],
            setpoint: Setpoint::Idle,
            torque_nm: Vector3::zeros(),
            thrust_fraction: 0.0,
            attitude_sp: UnitQuaternion::identity(),
            saturated: false,
            action: SafetyAction::None,
        }
    }
}

/// Mode logic, safety monitor and cascaded loops for one vehicle.
#[derive(Debug, Clone)]
pub struct FlightController {
    pub config: ControllerConfig,
    mixer: Mixer,
    attitude: AttitudeController,
    position: PositionController,
    mode: FlightMode,
    home: Vector3<f64>,
    hold_target: Vector3<f64>,
    yaw_sp: f64,
    mission: Option<Mission>,
    progress: MissionProgress,
    rtl_phase: RtlPhase,
    land_xy: Vector3<f64>,
    monitor: FailsafeMonitor,
    last_action: SafetyAction,
    landed_timer_s: f64,
    landed: bool,
    last_rc: RcInput,
    last_track: Option<TrackInput>,
    estimate: NavEstimate,
    events: Vec<ControlEvent>,
}

fn yaw_of(q: &UnitQuaternion<f64>) -> f64 {
    q.euler_angles().2
}

impl FlightController {
    pub fn new(
        config: ControllerConfig,
        mixer: Mixer,
        mass_kg: f64,
        inertia: Vector3<f64>,
    ) -> Self {
        let attitude = AttitudeController::new(config.attitude.clone(), inertia);
        let position =
            PositionController::new(config.position.clone(), mass_kg, mixer.max_total_thrust());
        Self {
            config,
            mixer,
            attitude,
            position,
            mode: FlightMode::Disarmed,
            home: Vector3::zeros(),
            hold_target: Vector3::zeros(),
            yaw_sp: 0.0,
            mission: None,
            progress: MissionProgress::default(),
            rtl_phase: RtlPhase::Climb,
            land_xy: Vector3::zeros(),
            monitor: FailsafeMonitor::default(),
            last_action: SafetyAction::None,
            landed_timer_s: 0.0,
            landed: true,
            last_rc: RcInput::centered(),
            last_track: None,
            estimate: NavEstimate::default(),
            events: Vec::new(),
        }
    }

    pub fn mode(&self) -> FlightMode {
        self.mode
    }

    pub fn home(&self) -> Vector3<f64> {
        self.home
    }

    pub fn hold_target(&self) -> Vector3<f64> {
        self.hold_target
    }

    pub fn mission(&self) -> Option<&Mission> {
        self.mission.as_ref()
    }

    pub fn mission_progress(&self) -> MissionProgress {
        self.progress
    }

    pub fn safety_action(&self) -> SafetyAction {
        self.last_action
    }

    pub fn failsafe_latched(&self) -> Option<SafetyAction> {
        self.monitor.latched()
    }

    pub fn is_landed(&self) -> bool {
        self.landed
    }

    pub fn mixer(&self) -> &Mixer {
        &self.mixer
    }

    pub fn drain_events(&mut self) -> Vec<ControlEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn mode_context(&self) -> ModeContext {
        ModeContext {
            vision_locked: self.last_track.map(|t| t.locked).unwrap_or(false),
            mission_valid: self.mission.is_some(),
            horizontal_ok: self.estimate.horizontal_ok(),
            landed: self.landed,
            failsafe_latched: self.monitor.latched().is_some(),
        }
    }

    fn set_mode(&mut self, to: FlightMode) {
        if to == self.mode {
            return;
        }
        let from = self.mode;
        self.mode = to;
        self.position.reset();
        let pos = self.estimate.position_ned_m;
        self.yaw_sp = yaw_of(&self.estimate.attitude_q);
        match to {
            FlightMode::PositionHold | FlightMode::AltitudeHold => self.hold_target = pos,
            FlightMode::AutoMission => self.progress = MissionProgress::default(),
            FlightMode::ReturnToLaunch => self.rtl_phase = RtlPhase::Climb,
            FlightMode::Land => self.land_xy = pos,
            FlightMode::Track => self.hold_target = pos,
            FlightMode::Disarmed => {
                self.attitude.reset();
            }
            FlightMode::Manual => {}
        }
        if from == FlightMode::Disarmed {
            self.attitude.reset();
        }
        self.events.push(ControlEvent::ModeChanged { from, to });
    }

    fn reject(&mut self, command: &Command, reason: Rejection) -> Result<(), Rejection> {
        self.events.push(ControlEvent::Rejected {
            command: format!("{command:?}"),
            reason: reason.clone(),
        });
        Err(reason)
    }

    /// Applies an operator command. Rejections are also queued as events.
    pub fn command(&mut self, cmd: Command) -> Result<(), Rejection> {
        let ctx = self.mode_context();
        match &cmd {
            Command::Arm => {
                if self.mode.is_armed() {
                    return self.reject(&cmd, Rejection::AlreadyArmed);
                }
                if ctx.failsafe_latched {
                    return self.reject(&cmd, Rejection::FailsafeActive);
                }
                if !self.estimate.is_usable() {
                    return self.reject(&cmd, Rejection::NoPositionFix);
                }
                self.home = self.estimate.position_ned_m;
                self.landed = true;
                self.landed_timer_s = 0.0;
                let to = if ctx.horizontal_ok {
                    FlightMode::PositionHold
                } else {
                    FlightMode::AltitudeHold
                };
                self.set_mode(to);
                Ok(())
            }
            Command::Disarm => match mode_transition(self.mode, FlightMode::Disarmed, &ctx) {
                Ok(()) => {
                    self.set_mode(FlightMode::Disarmed);
                    Ok(())
                }
                Err(e) => self.reject(&cmd, e),
            },
            Command::Takeoff { altitude_m } => {
                if !self.mode.is_armed() {
                    return self.reject(&cmd, Rejection::NotArmed);
                }
                if ctx.failsafe_latched {
                    return self.reject(&cmd, Rejection::FailsafeActive);
                }
                if !matches!(
                    self.mode,
                    FlightMode::PositionHold | FlightMode::AltitudeHold
                ) {
                    let to = if ctx.horizontal_ok {
                        FlightMode::PositionHold
                    } else {
                        FlightMode::AltitudeHold
                    };
                    if let Err(e) = mode_transition(self.mode, to, &ctx) {
                        return self.reject(&cmd, e);
                    }
                    self.set_mode(to);
                }
                let alt = altitude_m
                    .unwrap_or(self.config.takeoff_altitude_m)
                    .max(1.0);
                self.hold_target.z = self.home.z - alt;
                Ok(())
            }
            Command::Land => self.request_mode(&cmd, FlightMode::Land),
            Command::ReturnToLaunch => self.request_mode(&cmd, FlightMode::ReturnToLaunch),
            Command::MissionStart => self.request_mode(&cmd, FlightMode::AutoMission),
            Command::SetMode(m) => self.request_mode(&cmd, *m),
            Command::FailsafeReset => {
                self.monitor.reset();
                self.last_action = SafetyAction::None;
                self.events.push(ControlEvent::FailsafeCleared);
                Ok(())
            }
            Command::UploadMission(m) => {
                if matches!(self.mode, FlightMode::AutoMission) {
                    return self.reject(&cmd, Rejection::Unsupported);
                }
                match m.validate(&self.config.limits, &self.home) {
                    Ok(()) => {
                        self.mission = Some(m.clone());
                        self.events.push(ControlEvent::MissionAccepted {
                            waypoints: m.waypoints.len(),
                        });
                        Ok(())
                    }
                    Err(e) => {
                        self.mission = None;
                        self.reject(&cmd, Rejection::Mission(e))
                    }
                }
            }
        }
    }

    fn request_mode(&mut self, cmd: &Command, to: FlightMode) -> Result<(), Rejection> {
        match mode_transition(self.mode, to, &self.mode_context()) {
            Ok(()) => {
                self.set_mode(to);
                Ok(())
            }
            Err(e) => self.reject(cmd, e),
        }
    }

    fn update_landed(&mut self, dt: f64) {
        let e = &self.estimate;
        let near_ground = e.position_ned_m.z > self.home.z - LANDED_HEIGHT_M;
        let slow = e.velocity_ned_mps.norm() < 0.3;
        let descending_mode = matches!(self.mode, FlightMode::Land)
            || self.hold_target.z > self.home.z - LANDED_HEIGHT_M;
        if near_ground && slow && descending_mode {
            self.landed_timer_s += dt;
        } else {
            self.landed_timer_s = 0.0;
        }
        let was = self.landed;
        self.landed = self.landed_timer_s >= LANDED_DWELL_S || (self.landed && near_ground && slow);
        if !near_ground {
            self.landed = false;
        }
        if self.landed && !was {
            self.events.push(ControlEvent::Landed);
        }
    }

    fn apply_safety(&mut self, inputs: &ControlInputs<'_>) -> SafetyAction {
        let track = if self.mode == FlightMode::Track {
            inputs.track
        } else {
            None
        };
        let safety = SafetyInputs {
            position_ned_m: self.estimate.position_ned_m,
            home_ned_m: self.home,
            estimate_valid: self.estimate.is_usable(),
            cell_voltage_v: inputs.cell_voltage_v,
            link_age_s: inputs.link_age_s,
            target_range_m: track.filter(|t| t.locked).map(|t| t.range_m),
            target_position_ned_m: track.filter(|t| t.locked).map(|t| t.target_position_ned),
            obstacles_ned_m: inputs.obstacles_ned_m,
        };
        let action = self.monitor.check(&safety, &self.config.limits);
        if !action.same_kind(&self.last_action) && action != SafetyAction::None {
            self.events.push(ControlEvent::Failsafe(action));
        }
        self.last_action = action;
        match action {
            SafetyAction::Land(_) if self.mode != FlightMode::Land => {
                self.set_mode(FlightMode::Land)
            }
            SafetyAction::ReturnToLaunch(_)
                if !matches!(self.mode, FlightMode::ReturnToLaunch | FlightMode::Land) =>
            {
                self.set_mode(FlightMode::ReturnToLaunch)
            }
            _ => {}
        }
        action
    }

    /// Runs one control cycle.
    pub fn update(&mut self, inputs: &ControlInputs<'_>, dt: f64) -> ControlOutput {
        self.estimate = *inputs.estimate;
        if let Some(rc) = inputs.rc {
            self.last_rc = rc;
        }
        self.last_track = inputs.track;
        if !self.mode.is_armed() {
            self.landed = true;
            return ControlOutput::idle();
        }
        self.update_landed(dt);
        if self.landed && self.mode == FlightMode::Land {
            self.set_mode(FlightMode::Disarmed);
            return ControlOutput::idle();
        }

        let action = self.apply_safety(inputs);

        if !self.estimate.valid.attitude {
            self.events.push(ControlEvent::EstimateInvalid);
            let thrust = 0.9 * self.position.hover_thrust_fraction();
            let mut out = self.output_from(
                Vector3::zeros(),
                thrust,
                UnitQuaternion::identity(),
                Setpoint::Idle,
            );
            out.action = action;
            return out;
        }

        if self.mode.needs_horizontal_fix() && !self.estimate.horizontal_ok() {
            self.set_mode(FlightMode::AltitudeHold);
        }

        let (setpoint, tsp) = self.outer_loop(action, dt);
        let att = self.estimate.attitude_q;
        let torque =
            self.attitude
                .update(&att, &self.estimate.body_rates_radps, &tsp.attitude_q, dt);
        let mut out = self.output_from(torque, tsp.thrust, tsp.attitude_q, setpoint);
        out.action = action;
        out
    }

    fn output_from(
        &self,
        torque: Vector3<f64>,
        thrust: f64,
        attitude_sp: UnitQuaternion<f64>,
        setpoint: Setpoint,
    ) -> ControlOutput {
        let thrust = thrust.clamp(0.0, 1.0);
        let mix = self.mixer.mix(&Wrench {
            thrust_n: thrust * self.mixer.max_total_thrust(),
            torque_nm: torque,
        });
        ControlOutput {
            commands: mix.commands,
            setpoint,
            torque_nm: torque,
            thrust_fraction: thrust,
            attitude_sp,
            saturated: mix.saturated,
            action: SafetyAction::None,
        }
    }

    fn position_hold(
        &mut self,
        target: Vector3<f64>,
        ff: Vector3<f64>,
        dt: f64,
    ) -> (Setpoint, ThrustSetpoint) {
        let e = self.estimate;
        let tsp = self.position.update(
            &e.position_ned_m,
            &e.velocity_ned_mps,
            &target,
            &ff,
            self.yaw_sp,
            dt,
        );
        (
            Setpoint::Position {
                position_ned: target,
                yaw: self.yaw_sp,
            },
            tsp,
        )
    }

    fn velocity_hold(&mut self, v_sp: Vector3<f64>, dt: f64) -> (Setpoint, ThrustSetpoint) {
        let e = self.estimate;
        let tsp = self.position.velocity_control(
            &e.velocity_ned_mps,
            &v_sp,
            &Vector3::zeros(),
            self.yaw_sp,
            dt,
        );
        (
            Setpoint::Velocity {
                velocity_ned: v_sp,
                yaw: self.yaw_sp,
            },
            tsp,
        )
    }

    /// Vertical speed control only; attitude comes from `tilt`.
    fn vertical_hold(
        &mut self,
        vz_sp: f64,
        tilt: UnitQuaternion<f64>,
        dt: f64,
    ) -> (Setpoint, ThrustSetpoint) {
        let e = self.estimate;
        let v_sp = Vector3::new(e.velocity_ned_mps.x, e.velocity_ned_mps.y, vz_sp);
        let mut tsp = self.position.velocity_control(
            &e.velocity_ned_mps,
            &v_sp,
            &Vector3::zeros(),
            self.yaw_sp,
            dt,
        );
        // collective for the commanded tilt keeps the vertical component
        let cos_tilt = tilt_angle(&tilt).cos().max(0.5);
        tsp.thrust = (tsp.thrust / cos_tilt).clamp(0.0, 1.0);
        tsp.attitude_q = tilt;
        (
            Setpoint::Attitude {
                attitude_q: tilt,
                thrust: tsp.thrust,
            },
            tsp,
        )
    }

    fn outer_loop(&mut self, action: SafetyAction, dt: f64) -> (Setpoint, ThrustSetpoint) {
        let e = self.estimate;
        let pos = e.position_ned_m;
        if let SafetyAction::BackOff {
            from, distance_m, ..
        } = action
        {
            if self.mode.needs_horizontal_fix() {
                let away = pos - Vector3::from(from);
                let mut dir = Vector3::new(away.x, away.y, 0.0);
                if dir.norm() < 1e-6 {
                    dir = Vector3::new(-self.yaw_sp.cos(), -self.yaw_sp.sin(), 0.0);
                }
                let dir = dir.normalize();
                let mut v = dir * self.config.back_off_speed_mps;
                // a moving target: keep its velocity and add the missing retreat
                if let Some(t) = self
                    .last_track
                    .filter(|t| t.locked && self.mode == FlightMode::Track)
                {
                    let g = Vector3::new(t.velocity_sp_ned.x, t.velocity_sp_ned.y, 0.0);
                    v = g + dir * (self.config.back_off_speed_mps - g.dot(&dir)).max(0.0);
                    self.yaw_sp = t.yaw_sp;
                }
                // remember the point we back off to so Track resumes from there
                self.hold_target = Vector3::from(from) + dir * distance_m;
                self.hold_target.z = pos.z;
                let vz = self.config.position.pos_p_z * (self.hold_target.z - pos.z);
                return self.velocity_hold(Vector3::new(v.x, v.y, vz), dt);
            }
        }
        match self.mode {
            FlightMode::Disarmed => (
                Setpoint::Idle,
                ThrustSetpoint {
                    attitude_q: UnitQuaternion::identity(),
                    thrust: 0.0,
                },
            ),
            FlightMode::Manual => {
                let rc = self.last_rc;
                self.yaw_sp = wrap_pi(
                    self.yaw_sp + manual::deadband(rc.yaw) * self.config.max_yaw_rate_radps * dt,
                );
                let q = manual::stick_attitude(&rc, self.yaw_sp);
                let thrust = rc.throttle.clamp(0.0, 1.0);
                (
                    Setpoint::Attitude {
                        attitude_q: q,
                        thrust,
                    },
                    ThrustSetpoint {
                        attitude_q: q,
                        thrust,
                    },
                )
            }
            FlightMode::AltitudeHold => {
                let rc = self.last_rc;
                self.yaw_sp = wrap_pi(
                    self.yaw_sp + manual::deadband(rc.yaw) * self.config.max_yaw_rate_radps * dt,
                );
                let g = &self.config.position;
                let climb = manual::stick_climb_rate(&rc, g.max_climb, g.max_descent);
                self.hold_target.z -= climb * dt;
                let vz = (g.pos_p_z * (self.hold_target.z - pos.z) - climb)
                    .clamp(-g.max_climb, g.max_descent);
                let q = manual::stick_attitude(&rc, self.yaw_sp);
                self.vertical_hold(vz, q, dt)
            }
            FlightMode::PositionHold => {
                let rc = self.last_rc;
                let g = &self.config.position;
                let v_stick =
                    Vector3::new(manual::deadband(rc.pitch), manual::deadband(rc.roll), 0.0)
                        * g.max_speed_xy;
                let (s, c) = self.yaw_sp.sin_cos();
                let v_ned = Vector3::new(
                    c * v_stick.x - s * v_stick.y,
                    s * v_stick.x + c * v_stick.y,
                    0.0,
                );
                self.hold_target += v_ned * dt;
                let climb = manual::stick_climb_rate(&rc, g.max_climb, g.max_descent);
                self.hold_target.z -= climb * dt;
                self.yaw_sp = wrap_pi(
                    self.yaw_sp + manual::deadband(rc.yaw) * self.config.max_yaw_rate_radps * dt,
                );
                let target = self.hold_target;
                self.position_hold(target, v_ned, dt)
            }
            FlightMode::AutoMission => {
                let Some(mission) = self.mission.clone() else {
                    self.set_mode(FlightMode::PositionHold);
                    let target = self.hold_target;
                    return self.position_hold(target, Vector3::zeros(), dt);
                };
                let was_complete = self.progress.complete;
                let (target, progress) = mission_step(&pos, &mission, &self.progress, dt);
                self.progress = progress;
                if progress.complete && !was_complete {
                    self.events.push(ControlEvent::MissionComplete);
                }
                self.position_hold(target, Vector3::zeros(), dt)
            }
            FlightMode::Track => match self.last_track.filter(|t| t.locked) {
                Some(t) => {
                    self.yaw_sp = t.yaw_sp;
                    let g = &self.config.position;
                    let vz = (g.pos_p_z * (self.hold_target.z - pos.z))
                        .clamp(-g.max_climb, g.max_descent);
                    let v = Vector3::new(t.velocity_sp_ned.x, t.velocity_sp_ned.y, vz);
                    self.velocity_hold(v, dt)
                }
                None => {
                    self.events.push(ControlEvent::TrackLost);
                    self.set_mode(FlightMode::PositionHold);
                    let target = self.hold_target;
                    self.position_hold(target, Vector3::zeros(), dt)
                }
            },
            FlightMode::ReturnToLaunch => {
                if !e.horizontal_ok() {
                    self.set_mode(FlightMode::Land);
                    return self.outer_loop(action, dt);
                }
                let rtl_z = pos.z.min(self.home.z - self.config.rtl_altitude_m);
                match self.rtl_phase {
                    RtlPhase::Climb => {
                        if self.hold_target.z > rtl_z
                            || (self.hold_target.xy() - pos.xy()).norm() > 50.0
                        {
                            self.hold_target = Vector3::new(pos.x, pos.y, rtl_z);
                        }
                        if (pos.z - self.hold_target.z).abs() < 0.5 {
                            self.rtl_phase = RtlPhase::Return;
                        }
                    }
                    RtlPhase::Return => {
                        self.hold_target =
                            Vector3::new(self.home.x, self.home.y, self.hold_target.z);
                        if (pos.xy() - self.home.xy()).norm() < 1.0 {
                            self.set_mode(FlightMode::Land);
                            return self.outer_loop(action, dt);
                        }
                    }
                }
                let target = self.hold_target;
                self.position_hold(target, Vector3::zeros(), dt)
            }
            FlightMode::Land => {
                let speed = self.config.land_speed_mps;
                if e.horizontal_ok() {
                    let g = &self.config.position;
                    let err = self.land_xy - pos;
                    let v = Vector3::new(g.pos_p_xy * err.x, g.pos_p_xy * err.y, speed);
                    self.velocity_hold(v, dt)
                } else {
                    let q = UnitQuaternion::from_euler_angles(0.0, 0.0, self.yaw_sp);
                    self.vertical_hold(speed, q, dt)
                }
            }
        }
    }
}

pub fn wrap_pi(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = (a + std::f64::consts::PI) % two_pi;
    if x < 0.0 {
        x += two_pi;
    }
    x - std::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atmos::SizingConfig;
    use crate::dynamics::{Airframe, AirframeParams};
    use crate::estimator::ValidFlags;

    fn controller() -> FlightController {
        let cfg = SizingConfig::reference();
        let af = Airframe::new(AirframeParams::default(), cfg.powertrain);
        let mixer = Mixer::for_airframe(&af, cfg.environment.air_density().unwrap());
        FlightController::new(
            ControllerConfig::default(),
            mixer,
            af.mass_kg(),
            af.inertia(),
        )
    }

    fn good_estimate() -> NavEstimate {
        NavEstimate {
            valid: ValidFlags {
                attitude: true,
                vertical: true,
                horizontal: true,
            },
            gps_age_us: 0,
            ..Default::default()
        }
    }

    fn inputs(est: &NavEstimate) -> ControlInputs<'_> {
        ControlInputs {
            estimate: est,
            cell_voltage_v: 4.0,
            link_age_s: None,
            rc: None,
            track: None,
            obstacles_ned_m: &[],
        }
    }

    fn armed() -> FlightController {
        let mut c = controller();
        let est = good_estimate();
        c.update(&inputs(&est), 0.004);
        c.command(Command::Arm).unwrap();
        c
    }

    #[test]
    fn custom_mode_round_trip() {
        for m in FlightMode::ALL {
            assert_eq!(FlightMode::from_custom_mode(m.to_custom_mode()), Some(m));
        }
        assert_eq!(FlightMode::from_custom_mode(99), None);
    }

    #[test]
    fn arm_enters_position_hold() {
        let mut c = armed();
        assert_eq!(c.mode(), FlightMode::PositionHold);
        assert_eq!(c.command(Command::Arm), Err(Rejection::AlreadyArmed));
    }

    #[test]
    fn set_mode_while_disarmed_is_rejected() {
        let mut c = controller();
        assert_eq!(
            c.command(Command::SetMode(FlightMode::Manual)),
            Err(Rejection::NotArmed)
        );
    }

    #[test]
    fn track_needs_lock() {
        let mut c = armed();
        assert_eq!(
            c.command(Command::SetMode(FlightMode::Track)),
            Err(Rejection::NoVisionLock)
        );
        let ev = c.drain_events();
        assert!(ev
            .iter()
            .any(|e| matches!(e, ControlEvent::Rejected { .. })));
    }

    #[test]
    fn takeoff_sets_default_altitude() {
        let mut c = armed();
        c.command(Command::Takeoff { altitude_m: None }).unwrap();
        assert_eq!(c.hold_target().z, -10.0);
    }

    #[test]
    fn disarmed_output_is_idle() {
        let mut c = controller();
        let est = good_estimate();
        let out = c.update(&inputs(&est), 0.004);
        assert_eq!(out.commands, [0.0; MOTORS]);
    }

    #[test]
    fn geofence_breach_switches_to_rtl() {
        let mut c = armed();
        let mut est = good_estimate();
        est.position_ned_m = Vector3::new(201.0, 0.0, -20.0);
        c.update(&inputs(&est), 0.004);
        assert_eq!(c.mode(), FlightMode::ReturnToLaunch);
        assert_eq!(
            c.command(Command::SetMode(FlightMode::PositionHold)),
            Err(Rejection::FailsafeActive)
        );
        c.command(Command::FailsafeReset).unwrap();
        est.position_ned_m = Vector3::new(10.0, 0.0, -20.0);
        c.update(&inputs(&est), 0.004);
        assert!(c
            .command(Command::SetMode(FlightMode::PositionHold))
            .is_ok());
    }

    #[test]
    fn invalid_estimate_zero_torque() {
        let mut c = armed();
        let mut est = good_estimate();
        est.position_ned_m.z = -5.0;
        est.valid.attitude = false;
        let out = c.update(&inputs(&est), 0.004);
        assert_eq!(out.torque_nm, Vector3::zeros());
        assert!(matches!(
            out.action,
            SafetyAction::Land(FailsafeReason::EstimatorInvalid)
        ));
    }

    #[test]
    fn wrap_pi_range() {
        for a in [-10.0, -3.2, 0.0, 3.2, 10.0] {
            let w = wrap_pi(a);
            assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&w));
            assert!(
                ((a - w) / (2.0 * std::f64::consts::PI)).fract().abs() < 1e-9
                    || ((a - w) / (2.0 * std::f64::consts::PI)).fract().abs() > 1.0 - 1e-9
            );
        }
    }
}
