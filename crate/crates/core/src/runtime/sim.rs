//! Deterministic closed-loop simulation of one vehicle and its operator.

use std::fmt;
use std::sync::Arc;

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bus::{ImageHub, ImpairedLink};
use crate::control::{
    Command, ControlEvent, ControlInputs, ControlOutput, FlightController, FlightMode, Mixer,
    RcInput, SafetyAction, TrackInput,
};
use crate::dynamics::{Airframe, BatteryState, MotorBank, RigidBodyState, WindState, MOTORS};
use crate::estimator::{Estimator, NavEstimate, SensorBatch};
use crate::proto::{
    core_registry, ids, ChannelState, Decoder, Frame, LinkStats, Message, Registry, TlogRecord,
};
use crate::sensors::{
    sample_baro, sample_gps, sample_imu, sample_mag, BaroSample, GpsSample, ImuSample, MagSample,
};
use crate::vision::{
    in_central_region, render_frame, CameraPose, Gimbal, GroundTarget, Guidance, GuidanceOutput,
    ImageFrame, TargetTrack, Tracker,
};

use super::gcs::{self, MissionAssembler, Uplink};
use super::scenario::{Scenario, ScriptAction, ScriptEntry};
use super::RuntimeError;

/// Touchdown speed above which contact is logged as an impact.
pub const IMPACT_SPEED_MPS: f64 = 3.0;
/// Side of the central image box used for tracking quality, as a fraction
/// of each dimension.
pub const CENTRAL_FRACTION: f64 = 0.2;
/// Downsampling factor for streamed frames (640x480 -> 80x60).
pub const STREAM_DOWNSAMPLE: u32 = 8;
pub const STREAM_CHUNK: usize = 240;

const CAMERA_ID: u32 = 0;
const CAMERA_WRITER: u32 = 1;

// independent random streams per subsystem
const STREAM_SENSORS: u64 = 0x5e45;
const STREAM_WIND: u64 = 0x3149;
const STREAM_VISION: u64 = 0x7153;
const STREAM_UPLINK: u64 = 0x0b11;
const STREAM_DOWNLINK: u64 = 0xd011;

fn stream_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent {
    Control(ControlEvent),
    CommandAccepted(String),
    UplinkRejected(String),
    GroundImpact { speed_mps: f64 },
    Script(String),
}

impl fmt::Display for SimEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Control(e) => write!(f, "{e}"),
            Self::CommandAccepted(c) => write!(f, "accepted {c}"),
            Self::UplinkRejected(r) => write!(f, "uplink rejected: {r}"),
            Self::GroundImpact { speed_mps } => write!(f, "ground impact at {speed_mps:.2} m/s"),
            Self::Script(s) => write!(f, "script {s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionEvent {
    pub t_us: u64,
    pub event: SimEvent,
}

impl SessionEvent {
    pub fn t_s(&self) -> f64 {
        self.t_us as f64 * 1e-6
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub t_us: u64,
    pub position_ned_m: Vector3<f64>,
    pub velocity_ned_mps: Vector3<f64>,
    pub attitude_q: UnitQuaternion<f64>,
    pub body_rates_radps: Vector3<f64>,
    pub estimate_position_ned_m: Vector3<f64>,
    pub motor_rpm: [f64; MOTORS],
    pub cell_voltage_v: f64,
    pub wind_ned_mps: Vector3<f64>,
    pub mode: FlightMode,
}

impl TruthSample {
    pub fn t_s(&self) -> f64 {
        self.t_us as f64 * 1e-6
    }
}

/// Per-frame vision outcome next to the true geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisionSample {
    pub t_us: u64,
    pub frame_seq: u64,
    pub locked: bool,
    pub centroid_px: Vector2<f64>,
    pub pixel_mass: f64,
    pub in_central: bool,
    pub true_range_m: f64,
    pub true_target_ned: Vector3<f64>,
    /// Guidance output for this frame, if locked.
    pub guidance: Option<GuidanceOutput>,
    pub mode: FlightMode,
}

/// Everything a run leaves behind.
#[derive(Debug, Clone, Default)]
pub struct SessionLog {
    pub scenario: String,
    pub seed: u64,
    pub tlog: Vec<TlogRecord>,
    pub truth: Vec<TruthSample>,
    pub events: Vec<SessionEvent>,
    pub vision: Vec<VisionSample>,
    /// Decoder statistics of the vehicle receiving the uplink.
    pub uplink_stats: LinkStats,
    /// Decoder statistics of the ground receiving the downlink.
    pub downlink_stats: LinkStats,
}

impl SessionLog {
    pub fn tlog_bytes(&self) -> Vec<u8> {
        crate::proto::tlog_write(&self.tlog).expect("session tlog is well formed")
    }

    pub fn truth_csv(&self) -> String {
        let mut out = String::from(
            "t_us,north,east,down,vn,ve,vd,qw,qx,qy,qz,p,q,r,est_north,est_east,est_down,\
             rpm0,rpm1,rpm2,rpm3,rpm4,rpm5,cell_v,wind_n,wind_e,wind_d,mode\n",
        );
        for s in &self.truth {
            let q = s.attitude_q.quaternion();
            let quat = [q.w, q.i, q.j, q.k];
            let mut row: Vec<String> = vec![s.t_us.to_string()];
            let floats = s
                .position_ned_m
                .iter()
                .chain(s.velocity_ned_mps.iter())
                .chain(quat.iter())
                .chain(s.body_rates_radps.iter())
                .chain(s.estimate_position_ned_m.iter())
                .chain(s.motor_rpm.iter())
                .chain(std::iter::once(&s.cell_voltage_v))
                .chain(s.wind_ned_mps.iter());
            row.extend(floats.map(|x| x.to_string()));
            row.push(s.mode.name().to_string());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn events_text(&self) -> String {
        self.events
            .iter()
            .map(|e| format!("{:.3} {}\n", e.t_s(), e.event))
            .collect()
    }

    /// Writes `session.tlog`, `truth.csv` and `events.log` into `dir`.
    pub fn write_dir(&self, dir: &std::path::Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("session.tlog"), self.tlog_bytes())?;
        std::fs::write(dir.join("truth.csv"), self.truth_csv())?;
        std::fs::write(dir.join("events.log"), self.events_text())?;
        Ok(())
    }

    pub fn control_events(&self) -> impl Iterator<Item = (u64, &ControlEvent)> {
        self.events.iter().filter_map(|e| match &e.event {
            SimEvent::Control(c) => Some((e.t_us, c)),
            _ => None,
        })
    }

    /// Time of the first failsafe event matching `pred`.
    pub fn first_failsafe(&self, pred: impl Fn(&SafetyAction) -> bool) -> Option<u64> {
        self.control_events().find_map(|(t, e)| match e {
            ControlEvent::Failsafe(a) if pred(a) => Some(t),
            _ => None,
        })
    }

    pub fn mode_at(&self, t_us: u64) -> Option<FlightMode> {
        self.truth
            .iter()
            .take_while(|s| s.t_us <= t_us)
            .last()
            .map(|s| s.mode)
    }
}

struct VisionPipeline {
    target: GroundTarget,
    gimbal: Gimbal,
    hub: ImageHub,
    tracker: Tracker,
    guidance: Guidance,
    rng: ChaCha8Rng,
    seq: u64,
    last_track: Option<TargetTrack>,
    last_input: Option<TrackInput>,
    last_frame: Option<Arc<(ImageFrame, u64)>>,
}

/// Operator side of the scripted session.
struct ScriptedGcs {
    tx: ChannelState,
    decoder: Decoder,
    script: Vec<ScriptEntry>,
    next: usize,
    silent: bool,
    rc_stream: Option<RcInput>,
    next_heartbeat_us: u64,
    next_rc_us: u64,
}

pub struct Simulation {
    scenario: Scenario,
    reg: Arc<Registry>,
    airframe: Airframe,
    density: f64,
    physics_hz: u64,
    step: u64,
    t_us: u64,

    state: RigidBodyState,
    motors: MotorBank,
    battery: BatteryState,
    wind: WindState,
    commands: [f64; MOTORS],
    last_output: Option<ControlOutput>,
    accel_ned: Vector3<f64>,
    sensor_rng: ChaCha8Rng,
    wind_rng: ChaCha8Rng,

    estimator: Estimator,
    controller: FlightController,
    imu_buf: Vec<ImuSample>,
    mag: Option<MagSample>,
    baro: Option<BaroSample>,
    gps: Option<GpsSample>,
    last_gps: Option<GpsSample>,
    obstacles: Vec<Vector3<f64>>,

    uplink: ImpairedLink,
    downlink: ImpairedLink,
    vehicle_rx: Decoder,
    vehicle_tx: ChannelState,
    mission_rx: MissionAssembler,
    last_uplink_us: Option<u64>,
    rc: Option<(RcInput, u64)>,

    gcs: Option<ScriptedGcs>,
    vision: Option<VisionPipeline>,
    collect_downlink: bool,
    downlink_out: Vec<(u64, Vec<u8>)>,
    log: SessionLog,
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self, RuntimeError> {
        scenario.validate()?;
        let seed = scenario.seed.expect("validated");
        let reg = core_registry();
        let powertrain = scenario.powertrain()?;
        let airframe = Airframe::new(scenario.vehicle.airframe.clone(), powertrain);
        let density = scenario
            .environment
            .air_density()
            .map_err(|e| RuntimeError::Scenario(e.to_string()))?;
        let mixer = Mixer::for_airframe(&airframe, density);
        let controller = FlightController::new(
            scenario.controller.clone(),
            mixer,
            airframe.mass_kg(),
            airframe.inertia(),
        );
        let state = RigidBodyState {
            position_ned_m: scenario.home(),
            attitude_q: UnitQuaternion::from_euler_angles(
                0.0,
                0.0,
                scenario.initial.yaw_deg.to_radians(),
            ),
            ..Default::default()
        };
        let estimator = Estimator::new(
            scenario.estimator.clone(),
            scenario.environment.altitude_m,
            scenario.sensors.mag_declination_deg,
        );
        let mut script = scenario.script.clone();
        script.sort_by(|a, b| a.at_s.total_cmp(&b.at_s));
        let gcs = scenario.gcs.enabled.then(|| ScriptedGcs {
            tx: ChannelState::new(reg.clone(), gcs::GCS_SYS, gcs::GCS_COMP),
            decoder: Decoder::new(reg.clone()),
            script,
            next: 0,
            silent: false,
            rc_stream: None,
            next_heartbeat_us: 0,
            next_rc_us: 0,
        });
        let vision = scenario.target.clone().map(|target| VisionPipeline {
            target,
            gimbal: Gimbal::new(scenario.vision.gimbal, scenario.vision.camera.tilt_deg),
            hub: ImageHub::new(),
            tracker: Tracker::new(scenario.vision.tracker),
            guidance: Guidance::new(scenario.vision.guidance),
            rng: ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_VISION)),
            seq: 0,
            last_track: None,
            last_input: None,
            last_frame: None,
        });
        Ok(Self {
            reg: reg.clone(),
            density,
            physics_hz: scenario.rates.physics_hz as u64,
            step: 0,
            t_us: 0,
            motors: airframe.motor_bank(),
            battery: airframe.full_battery(),
            wind: WindState {
                mean_ned_mps: scenario.wind.mean(),
                gust_ned_mps: Vector3::zeros(),
            },
            commands: [0.0; MOTORS],
            last_output: None,
            accel_ned: Vector3::zeros(),
            sensor_rng: ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_SENSORS)),
            wind_rng: ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_WIND)),
            state,
            airframe,
            estimator,
            controller,
            imu_buf: Vec::new(),
            mag: None,
            baro: None,
            gps: None,
            last_gps: None,
            obstacles: scenario
                .obstacles
                .iter()
                .map(|o| Vector3::from(*o))
                .collect(),
            uplink: ImpairedLink::new(
                scenario.links.uplink.clone(),
                stream_seed(seed, STREAM_UPLINK),
            ),
            downlink: ImpairedLink::new(
                scenario.links.downlink.clone(),
                stream_seed(seed, STREAM_DOWNLINK),
            ),
            vehicle_rx: Decoder::new(reg.clone()),
            vehicle_tx: ChannelState::new(reg, gcs::VEHICLE_SYS, gcs::VEHICLE_COMP),
            mission_rx: MissionAssembler::default(),
            last_uplink_us: None,
            rc: None,
            gcs,
            vision,
            collect_downlink: false,
            downlink_out: Vec::new(),
            log: SessionLog {
                scenario: scenario.name.clone(),
                seed,
                ..Default::default()
            },
            scenario: scenario.clone(),
        })
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.reg
    }

    pub fn time_us(&self) -> u64 {
        self.t_us
    }

    pub fn time_s(&self) -> f64 {
        self.t_us as f64 * 1e-6
    }

    pub fn truth(&self) -> &RigidBodyState {
        &self.state
    }

    pub fn estimate(&self) -> &NavEstimate {
        self.estimator.estimate()
    }

    pub fn controller(&self) -> &FlightController {
        &self.controller
    }

    /// Output of the most recent control cycle.
    pub fn last_control(&self) -> Option<&ControlOutput> {
        self.last_output.as_ref()
    }

    pub fn mode(&self) -> FlightMode {
        self.controller.mode()
    }

    pub fn battery(&self) -> &BatteryState {
        &self.battery
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Keep delivered downlink bytes for [`Simulation::drain_downlink`].
    pub fn set_collect_downlink(&mut self, on: bool) {
        self.collect_downlink = on;
    }

    /// Downlink frames delivered since the last call, with delivery times.
    pub fn drain_downlink(&mut self) -> Vec<(u64, Vec<u8>)> {
        std::mem::take(&mut self.downlink_out)
    }

    /// Bytes from an external client, sent over the uplink now.
    pub fn inject_uplink(&mut self, bytes: &[u8]) {
        self.uplink.send(bytes, self.t_us);
    }

    /// Emits a STATUSTEXT on the downlink.
    pub fn notify(&mut self, severity: u8, text: &str) {
        let msg = gcs::statustext(&self.reg, severity, text);
        self.emit(&msg);
    }

    fn every(&self, hz: u32) -> bool {
        self.step % (self.physics_hz / hz as u64) == 0
    }

    /// True on the steps where a fractional-rate task is due.
    fn fractional_due(&self, hz: u32) -> bool {
        let hz = hz as u64;
        self.step == 0
            || (self.step * hz) / self.physics_hz != ((self.step - 1) * hz) / self.physics_hz
    }

    fn record(&mut self, event: SimEvent) {
        self.log.events.push(SessionEvent {
            t_us: self.t_us,
            event,
        });
    }

    fn emit(&mut self, msg: &Message) {
        let raw = match self.vehicle_tx.encode(msg) {
            Ok(r) => r,
            Err(_) => return,
        };
        self.log.tlog.push(TlogRecord {
            timestamp_us: self.scenario.epoch_us + self.t_us,
            frame: raw.clone(),
        });
        self.downlink.send(&raw, self.t_us);
    }

    /// Runs until simulated time reaches `t_s`.
    pub fn run_until(&mut self, t_s: f64) -> Result<(), RuntimeError> {
        let end_us = (t_s * 1e6).round() as u64;
        while self.t_us < end_us {
            self.step_once()?;
        }
        Ok(())
    }

    pub fn run_for(&mut self, seconds: f64) -> Result<(), RuntimeError> {
        self.run_until(self.time_s() + seconds)
    }

    /// Finishes the run and hands over the log.
    pub fn finish(mut self) -> SessionLog {
        self.log.uplink_stats = self.vehicle_rx.stats();
        if let Some(g) = &self.gcs {
            self.log.downlink_stats = g.decoder.stats();
        }
        self.log
    }

    /// One physics step with everything scheduled on it.
    pub fn step_once(&mut self) -> Result<(), RuntimeError> {
        let rates = self.scenario.rates.clone();
        self.scripted_gcs();
        self.receive_uplink();
        self.sample_sensors(&rates);
        if self.every(rates.control_hz) {
            self.control(1.0 / rates.control_hz as f64);
        }
        if self.vision.is_some() && self.fractional_due(rates.vision_hz) {
            self.vision_step(1.0 / rates.vision_hz as f64);
        }
        self.telemetry(&rates);
        self.deliver_downlink();
        self.physics()?;
        if self.every(rates.truth_hz) {
            self.record_truth();
        }
        self.step += 1;
        self.t_us = self.step * 1_000_000 / self.physics_hz;
        Ok(())
    }

    fn scripted_gcs(&mut self) {
        let Some(g) = self.gcs.as_mut() else { return };
        let now = self.t_us;
        let mut outgoing = Vec::new();
        let mut notes = Vec::new();
        while g.next < g.script.len() && (g.script[g.next].at_s * 1e6).round() as u64 <= now {
            let action = g.script[g.next].action.clone();
            g.next += 1;
            notes.push(format!("{action:?}"));
            let cmd = match &action {
                ScriptAction::Arm => Some(Command::Arm),
                ScriptAction::Disarm => Some(Command::Disarm),
                ScriptAction::Takeoff { altitude_m } => Some(Command::Takeoff {
                    altitude_m: *altitude_m,
                }),
                ScriptAction::Land => Some(Command::Land),
                ScriptAction::Rtl => Some(Command::ReturnToLaunch),
                ScriptAction::MissionStart => Some(Command::MissionStart),
                ScriptAction::SetMode { mode } => gcs::parse_mode(mode).map(Command::SetMode),
                ScriptAction::FailsafeReset => Some(Command::FailsafeReset),
                ScriptAction::UploadMission => {
                    self.scenario.mission.clone().map(Command::UploadMission)
                }
                ScriptAction::Rc { .. } => {
                    g.rc_stream = action.rc();
                    g.next_rc_us = now;
                    None
                }
                ScriptAction::RcRelease => {
                    g.rc_stream = None;
                    outgoing.push(gcs::rc_message(
                        &self.reg,
                        &RcInput::centered(),
                        (now / 1000) as u32,
                    ));
                    None
                }
                ScriptAction::Silence => {
                    g.silent = true;
                    g.rc_stream = None;
                    None
                }
                ScriptAction::Resume => {
                    g.silent = false;
                    g.next_heartbeat_us = now;
                    None
                }
            };
            if let Some(cmd) = cmd {
                outgoing.extend(
                    gcs::command_messages(&self.reg, &cmd).expect("core dialect encodes commands"),
                );
            }
        }
        if !g.silent && g.next_heartbeat_us <= now && g.next_heartbeat_us != u64::MAX {
            outgoing.push(gcs::gcs_heartbeat(&self.reg));
            let period = (1e6 / self.scenario.gcs.heartbeat_hz.max(1e-3)) as u64;
            g.next_heartbeat_us = now + period;
        }
        if let Some(rc) = g.rc_stream {
            if g.next_rc_us <= now {
                outgoing.push(gcs::rc_message(&self.reg, &rc, (now / 1000) as u32));
                g.next_rc_us = now + (1e6 / self.scenario.gcs.rc_hz.max(1e-3)) as u64;
            }
        }
        for msg in &outgoing {
            if let Ok(raw) = g.tx.encode(msg) {
                self.uplink.send(&raw, now);
            }
        }
        for n in notes {
            self.record(SimEvent::Script(n));
        }
    }

    fn receive_uplink(&mut self) {
        let delivered = self.uplink.poll(self.t_us);
        for (_, bytes) in delivered {
            for frame in self.vehicle_rx.feed(&bytes) {
                self.handle_uplink_frame(frame);
            }
        }
    }

    fn handle_uplink_frame(&mut self, frame: Frame) {
        let raw = crate::proto::encode_frame(&frame, &self.reg).expect("decoded frames re-encode");
        self.log.tlog.push(TlogRecord {
            timestamp_us: self.scenario.epoch_us + self.t_us,
            frame: raw,
        });
        self.last_uplink_us = Some(self.t_us);
        let decoded = frame
            .message(&self.reg)
            .map_err(|e| e.to_string())
            .and_then(|m| gcs::decode_uplink(&self.reg, &m));
        match decoded {
            Ok(Uplink::Heartbeat) => {}
            Ok(Uplink::Rc(rc)) => self.rc = Some((rc, self.t_us)),
            Ok(Uplink::Command { command, ack_id }) => self.apply_command(command, ack_id),
            Ok(Uplink::MissionItem(item)) => {
                if let Some(m) = self.mission_rx.push(item) {
                    self.apply_command(Command::UploadMission(m), ids::MISSION_ITEM as u16);
                }
            }
            Err(reason) => {
                self.notify(4, &format!("rejected: {reason}"));
                self.record(SimEvent::UplinkRejected(reason));
            }
        }
    }

    fn apply_command(&mut self, command: Command, ack_id: u16) {
        let name = match &command {
            Command::UploadMission(m) => format!("UploadMission({} waypoints)", m.waypoints.len()),
            c => format!("{c:?}"),
        };
        let result = self.controller.command(command);
        let ack = match result {
            Ok(()) => {
                self.record(SimEvent::CommandAccepted(name));
                gcs::ACK_ACCEPTED
            }
            Err(_) => gcs::ACK_DENIED,
        };
        let msg = gcs::command_ack(&self.reg, ack_id, ack);
        self.emit(&msg);
        self.flush_control_events();
    }

    fn flush_control_events(&mut self) {
        for e in self.controller.drain_events() {
            let severity = match &e {
                ControlEvent::Failsafe(_) => 2,
                ControlEvent::Rejected { .. }
                | ControlEvent::TrackLost
                | ControlEvent::EstimateInvalid => 4,
                _ => 6,
            };
            // the estimator flag repeats every cycle; report it once per second
            let quiet = matches!(e, ControlEvent::EstimateInvalid)
                && self.log.events.iter().rev().take(64).any(|p| {
                    matches!(p.event, SimEvent::Control(ControlEvent::EstimateInvalid))
                        && self.t_us - p.t_us < 1_000_000
                });
            if quiet {
                continue;
            }
            let text = e.to_string();
            self.notify(severity, &text);
            self.record(SimEvent::Control(e));
        }
    }

    fn satellites_at(&self, t_s: f64) -> u32 {
        self.scenario
            .satellite_schedule
            .iter()
            .filter(|c| c.at_s <= t_s)
            .max_by(|a, b| a.at_s.total_cmp(&b.at_s))
            .map(|c| c.satellites)
            .unwrap_or(self.scenario.sensors.satellites)
    }

    fn sample_sensors(&mut self, rates: &super::scenario::Rates) {
        let noise = &self.scenario.sensors;
        let imu = sample_imu(
            &self.state,
            &self.accel_ned,
            &self.motors,
            noise,
            self.t_us,
            &mut self.sensor_rng,
        );
        if self.step == 0 {
            let mag = sample_mag(&self.state, noise, self.t_us, &mut self.sensor_rng);
            self.estimator.align(&imu, &mag);
        }
        self.imu_buf.push(imu);
        if self.every(rates.mag_hz) {
            self.mag = Some(sample_mag(
                &self.state,
                noise,
                self.t_us,
                &mut self.sensor_rng,
            ));
        }
        if self.every(rates.baro_hz) {
            let site = self.scenario.environment.altitude_m;
            self.baro = Some(sample_baro(
                &self.state,
                site,
                noise,
                self.t_us,
                &mut self.sensor_rng,
            ));
        }
        if self.every(rates.gps_hz) {
            let sats = self.satellites_at(self.time_s());
            let noise = &self.scenario.sensors;
            let g = sample_gps(&self.state, sats, noise, self.t_us, &mut self.sensor_rng);
            self.gps = Some(g);
            self.last_gps = Some(g);
        }
    }

    fn link_age_s(&self) -> Option<f64> {
        let age = |t: u64| (self.t_us - t) as f64 * 1e-6;
        let link = self.last_uplink_us.map(age)?;
        // flying on sticks also needs the sticks to be fresh
        let rc = match (self.controller.mode(), self.rc) {
            (FlightMode::Manual, Some((_, t))) => age(t),
            _ => 0.0,
        };
        Some(link.max(rc))
    }

    fn control(&mut self, dt: f64) {
        let batch = SensorBatch {
            imu: std::mem::take(&mut self.imu_buf),
            mag: self.mag.take(),
            baro: self.baro.take(),
            gps: self.gps.take(),
        };
        let estimate = self.estimator.step(&batch, self.t_us);
        let track = self.vision.as_ref().and_then(|v| v.last_input);
        let inputs = ControlInputs {
            estimate: &estimate,
            cell_voltage_v: self.battery.cell_voltage(),
            link_age_s: self.link_age_s(),
            rc: self.rc.map(|(rc, _)| rc),
            track,
            obstacles_ned_m: &self.obstacles,
        };
        let out = self.controller.update(&inputs, dt);
        self.commands = out.commands;
        self.last_output = Some(out);
        self.flush_control_events();
    }

    fn vision_step(&mut self, dt: f64) {
        let t_us = self.t_us;
        let t_s = self.time_s();
        let truth = self.state;
        let est = *self.estimator.estimate();
        let mode = self.controller.mode();
        let camera = self.scenario.vision.camera.clone();
        let render = self.scenario.vision.render;
        let v = self.vision.as_mut().expect("vision present");

        let head = v.gimbal.update(&truth.attitude_q, dt);
        let pose = CameraPose::from_gimbal(truth.position_ned_m, &head);
        let target = v.target.position(t_s);
        v.seq += 1;
        let frame = render_frame(&camera, &pose, &target, &render, v.seq, t_us, &mut v.rng);
        v.hub
            .put(CAMERA_WRITER, CAMERA_ID, frame)
            .expect("single camera writer");

        let Some((latest, _)) = v.hub.get_latest(CAMERA_ID) else {
            return;
        };
        let mut track = v.tracker.update(&latest.0);

        // the head yaw relative to the airframe is known from the gimbal encoder
        let truth_yaw = truth.attitude_q.euler_angles().2;
        let est_yaw = est.attitude_q.euler_angles().2;
        let head_yaw = v.gimbal.yaw().unwrap_or(truth_yaw);
        let est_head = UnitQuaternion::from_euler_angles(
            0.0,
            -v.gimbal.tilt_rad,
            est_yaw + (head_yaw - truth_yaw),
        );
        let est_pose = CameraPose::from_gimbal(est.position_ned_m, &est_head);
        let guidance = v.guidance.step(&track, &camera, &est_pose, 0.0);
        track.estimated_range_m = guidance.map(|g| g.range_m);
        v.last_input = Some(match guidance {
            Some(g) => TrackInput {
                locked: true,
                velocity_sp_ned: g.velocity_sp_ned,
                yaw_sp: g.yaw_sp,
                range_m: g.range_m,
                target_position_ned: g.target_ned,
            },
            None => TrackInput {
                locked: false,
                velocity_sp_ned: Vector3::zeros(),
                yaw_sp: est_yaw,
                range_m: f64::INFINITY,
                target_position_ned: target,
            },
        });
        v.last_track = Some(track);
        v.last_frame = Some(latest.clone());
        self.log.vision.push(VisionSample {
            t_us,
            frame_seq: track.frame_seq,
            locked: track.locked,
            centroid_px: track.centroid_px,
            pixel_mass: track.pixel_mass,
            in_central: track.locked
                && in_central_region(&camera, &track.centroid_px, CENTRAL_FRACTION),
            true_range_m: (target - truth.position_ned_m).norm(),
            true_target_ned: target,
            guidance,
            mode,
        });
    }

    fn telemetry(&mut self, rates: &super::scenario::Rates) {
        let reg = self.reg.clone();
        let t_ms = (self.t_us / 1000) as f64;
        if self.every(rates.heartbeat_hz) {
            let mode = self.controller.mode();
            let status = if self.controller.failsafe_latched().is_some() {
                5.0
            } else if mode.is_armed() {
                4.0
            } else {
                3.0
            };
            let hb = reg
                .build(
                    "HEARTBEAT",
                    &[
                        ("custom_mode", mode.to_custom_mode() as f64),
                        ("type", gcs::TYPE_HEXAROTOR),
                        ("autopilot", 3.0),
                        ("base_mode", if mode.is_armed() { 128.0 } else { 0.0 }),
                        ("system_status", status),
                        ("mavlink_version", 1.0),
                    ],
                )
                .expect("HEARTBEAT");
            self.emit(&hb);
            let stats = self.vehicle_rx.stats();
            let b = &self.battery;
            let sys = reg
                .build(
                    "SYS_STATUS",
                    &[
                        ("voltage_battery", (b.voltage_v * 1000.0).round()),
                        (
                            "current_battery",
                            (b.current_a * 100.0).round().clamp(-32768.0, 32767.0),
                        ),
                        ("consumed_mah", b.consumed_mah.round().min(65535.0)),
                        ("battery_remaining", (b.state_of_charge() * 100.0).round()),
                        ("failsafe", self.controller.safety_action().code() as f64),
                        (
                            "drop_rate_comm",
                            (stats.loss_fraction() * 10_000.0).round().min(10_000.0),
                        ),
                        ("errors_comm", (stats.frames_bad_crc as f64).min(65535.0)),
                    ],
                )
                .expect("SYS_STATUS");
            self.emit(&sys);
        }
        if !self.every(rates.telemetry_hz) {
            if rates.vision_stream_hz > 0
                && self.vision.is_some()
                && self.fractional_due(rates.vision_stream_hz)
            {
                self.stream_frame();
            }
            return;
        }
        let est = *self.estimator.estimate();
        let (roll, pitch, yaw) = est.attitude_q.euler_angles();
        let r = est.body_rates_radps;
        let att = reg
            .build(
                "ATTITUDE",
                &[
                    ("time_boot_ms", t_ms),
                    ("roll", roll),
                    ("pitch", pitch),
                    ("yaw", yaw),
                    ("rollspeed", r.x),
                    ("pitchspeed", r.y),
                    ("yawspeed", r.z),
                ],
            )
            .expect("ATTITUDE");
        self.emit(&att);
        let (p, v) = (est.position_ned_m, est.velocity_ned_mps);
        let pos = reg
            .build(
                "LOCAL_POSITION",
                &[
                    ("time_boot_ms", t_ms),
                    ("x", p.x),
                    ("y", p.y),
                    ("z", p.z),
                    ("vx", v.x),
                    ("vy", v.y),
                    ("vz", v.z),
                ],
            )
            .expect("LOCAL_POSITION");
        self.emit(&pos);
        if let Some(g) = self.last_gps {
            let h_acc = if g.h_accuracy_m.is_finite() {
                g.h_accuracy_m
            } else {
                9999.0
            };
            let msg = reg
                .build(
                    "GPS_RAW",
                    &[
                        ("time_usec", g.timestamp_us as f64),
                        ("north", g.position_ned_m.x),
                        ("east", g.position_ned_m.y),
                        ("down", g.position_ned_m.z),
                        ("vn", g.velocity_ned_mps.x),
                        ("ve", g.velocity_ned_mps.y),
                        ("vd", g.velocity_ned_mps.z),
                        ("h_acc", h_acc),
                        ("satellites_visible", g.num_satellites.min(255) as f64),
                        ("fix_type", if g.fix_ok { 3.0 } else { 0.0 }),
                    ],
                )
                .expect("GPS_RAW");
            self.emit(&msg);
        }
        if let Some(t) = self.vision.as_ref().and_then(|v| v.last_track) {
            let msg = reg
                .build(
                    "TRACK_STATUS",
                    &[
                        ("time_boot_ms", (t.timestamp_us / 1000) as f64),
                        ("cx", t.centroid_px.x),
                        ("cy", t.centroid_px.y),
                        ("pixel_mass", t.pixel_mass),
                        ("range_m", t.estimated_range_m.unwrap_or(0.0)),
                        ("locked", t.locked as u8 as f64),
                    ],
                )
                .expect("TRACK_STATUS");
            self.emit(&msg);
        }
        if rates.vision_stream_hz > 0
            && self.vision.is_some()
            && self.fractional_due(rates.vision_stream_hz)
        {
            self.stream_frame();
        }
    }

    fn stream_frame(&mut self) {
        let Some(frame) = self.vision.as_ref().and_then(|v| v.last_frame.clone()) else {
            return;
        };
        for msg in vision_frame_messages(&self.reg, &frame.0) {
            self.emit(&msg);
        }
    }

    fn deliver_downlink(&mut self) {
        let delivered = self.downlink.poll(self.t_us);
        for (due, bytes) in delivered {
            if let Some(g) = self.gcs.as_mut() {
                g.decoder.feed(&bytes);
            }
            if self.collect_downlink {
                self.downlink_out.push((due, bytes));
            }
        }
    }

    fn physics(&mut self) -> Result<(), RuntimeError> {
        let dt = 1.0 / self.physics_hz as f64;
        self.wind =
            crate::dynamics::wind_sample(&self.wind, &self.scenario.wind, dt, &mut self.wind_rng);
        let out = self
            .airframe
            .step(
                &self.state,
                &self.motors,
                &self.commands,
                &self.battery,
                &self.wind,
                self.density,
                dt,
            )
            .map_err(|e| RuntimeError::Dynamics(e.to_string()))?;
        let before = self.state.velocity_ned_mps;
        let mut next = out.state;
        if next.position_ned_m.z >= 0.0 && next.velocity_ned_mps.z >= 0.0 {
            let speed = next.velocity_ned_mps.z;
            if speed > IMPACT_SPEED_MPS && self.state.position_ned_m.z < 0.0 {
                self.record(SimEvent::GroundImpact { speed_mps: speed });
            }
            next.position_ned_m.z = 0.0;
            next.velocity_ned_mps = Vector3::zeros();
            next.body_rates_radps = Vector3::zeros();
            let yaw = next.attitude_q.euler_angles().2;
            next.attitude_q = UnitQuaternion::from_euler_angles(0.0, 0.0, yaw);
        }
        self.accel_ned = (next.velocity_ned_mps - before) / dt;
        self.state = next;
        self.motors = out.motors;
        self.battery = out.battery;
        Ok(())
    }

    fn record_truth(&mut self) {
        self.log.truth.push(TruthSample {
            t_us: self.t_us,
            position_ned_m: self.state.position_ned_m,
            velocity_ned_mps: self.state.velocity_ned_mps,
            attitude_q: self.state.attitude_q,
            body_rates_radps: self.state.body_rates_radps,
            estimate_position_ned_m: self.estimator.estimate().position_ned_m,
            motor_rpm: self.motors.rpm,
            cell_voltage_v: self.battery.cell_voltage(),
            wind_ned_mps: self.wind.velocity(),
            mode: self.controller.mode(),
        });
    }
}

/// Splits a frame into VISION_FRAME chunks after downsampling.
pub fn vision_frame_messages(reg: &Registry, frame: &ImageFrame) -> Vec<Message> {
    let small = frame.downsample(STREAM_DOWNSAMPLE);
    let count = small.pixels.len().div_ceil(STREAM_CHUNK);
    let schema = reg.get(ids::VISION_FRAME).expect("VISION_FRAME");
    let data_idx = schema.field_index("data").expect("data field");
    (0..count)
        .map(|i| {
            let mut msg = reg
                .build(
                    "VISION_FRAME",
                    &[
                        ("frame_seq", (frame.frame_seq % 65536) as f64),
                        ("chunk", i as f64),
                        ("chunk_count", count as f64),
                        ("width", small.width.min(255) as f64),
                        ("height", small.height.min(255) as f64),
                    ],
                )
                .expect("VISION_FRAME");
            let mut data: Vec<crate::proto::Value> = small.pixels
                [i * STREAM_CHUNK..((i + 1) * STREAM_CHUNK).min(small.pixels.len())]
                .iter()
                .map(|&p| crate::proto::Value::U8(p))
                .collect();
            data.resize(STREAM_CHUNK, crate::proto::Value::U8(0));
            msg.values[data_idx] = crate::proto::Value::Array(data);
            msg
        })
        .collect()
}

/// Runs a scenario headless for its full duration.
pub fn run_scenario(scenario: &Scenario) -> Result<SessionLog, RuntimeError> {
    let mut sim = Simulation::new(scenario)?;
    sim.run_until(scenario.duration_s)?;
    Ok(sim.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hover_scenario(seed: u64) -> Scenario {
        Scenario::from_toml(&format!(
            r#"
            name = "hover"
            seed = {seed}
            duration_s = 30
            [[script]]
            at_s = 1.0
            action = "arm"
            [[script]]
            at_s = 1.5
            action = "takeoff"
            altitude_m = 10.0
            "#
        ))
        .unwrap()
    }

    #[test]
    fn takeoff_and_hover() {
        let log = run_scenario(&hover_scenario(7)).unwrap();
        let settled: Vec<_> = log.truth.iter().filter(|s| s.t_s() >= 15.0).collect();
        assert!(!settled.is_empty());
        let n = settled.len() as f64;
        let mean = settled
            .iter()
            .map(|s| s.position_ned_m)
            .sum::<Vector3<f64>>()
            / n;
        let var = settled
            .iter()
            .map(|s| (s.position_ned_m - mean).norm_squared())
            .sum::<f64>()
            / n;
        assert!((mean.z + 10.0).abs() < 1.0, "altitude {}", -mean.z);
        assert!(var.sqrt() < 0.3);
        assert_eq!(log.truth.last().unwrap().mode, FlightMode::PositionHold);
    }

    #[test]
    fn same_seed_same_bytes() {
        let mut s = hover_scenario(11);
        s.duration_s = 5.0;
        let a = run_scenario(&s).unwrap();
        let b = run_scenario(&s).unwrap();
        assert_eq!(a.tlog_bytes(), b.tlog_bytes());
        assert_eq!(a.truth_csv(), b.truth_csv());
        s.seed = Some(12);
        let c = run_scenario(&s).unwrap();
        assert_ne!(a.truth_csv(), c.truth_csv());
    }

    #[test]
    fn silent_operator_triggers_return() {
        let mut s = hover_scenario(3);
        s.duration_s = 20.0;
        s.script.push(ScriptEntry {
            at_s: 12.0,
            action: ScriptAction::Silence,
        });
        let log = run_scenario(&s).unwrap();
        let t = log
            .first_failsafe(|a| {
                matches!(
                    a,
                    SafetyAction::ReturnToLaunch(crate::control::FailsafeReason::LinkLost)
                )
            })
            .expect("link loss failsafe");
        let age = t as f64 * 1e-6 - 11.0;
        assert!(age > 3.0 && age < 4.5, "triggered at {}", t as f64 * 1e-6);
    }
}
