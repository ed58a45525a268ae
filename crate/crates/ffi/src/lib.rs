//! C ABI bindings.
//!
//! Every function returns an [`HfStatus`]. On failure a message describing the
//! error is kept per thread and can be fetched with [`hf_last_error_message`].
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use hexaflight::atmos::{air_density, SizingConfig, SizingReport};
use hexaflight::control::{Command, FlightMode};
use hexaflight::proto::{core_registry, load_schema, ChannelState, Decoder, Frame, Registry};
use hexaflight::runtime::gcs::{command_messages, GCS_COMP, GCS_SYS};
use hexaflight::runtime::{Scenario, Simulation};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Config = 4,
    Protocol = 5,
    Simulation = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfCommand {
    Arm = 0,
    Disarm = 1,
    /// `param` is the target altitude in meters, 0 for the default.
    Takeoff = 2,
    Land = 3,
    ReturnToLaunch = 4,
    MissionStart = 5,
    FailsafeReset = 6,
    /// `param` is the flight mode index as carried in SET_MODE.
    SetMode = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HfSizingReport {
    pub air_density_kgm3: f64,
    pub pack_voltage_v: f64,
    pub hover_rpm: f64,
    pub hover_throttle_fraction: f64,
    pub hover_current_a: f64,
    pub hover_power_w: f64,
    pub flight_time_min: f64,
    pub thrust_to_weight: f64,
    pub tolerance_fraction: f64,
}

impl From<&SizingReport> for HfSizingReport {
    fn from(r: &SizingReport) -> Self {
        Self {
            air_density_kgm3: r.air_density_kgm3,
            pack_voltage_v: r.pack_voltage_v,
            hover_rpm: r.hover_rpm,
            hover_throttle_fraction: r.hover_throttle_fraction,
            hover_current_a: r.hover_current_a,
            hover_power_w: r.hover_power_w,
            flight_time_min: r.flight_time_min,
            thrust_to_weight: r.thrust_to_weight,
            tolerance_fraction: r.tolerance_fraction,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HfFrameInfo {
    pub seq: u8,
    pub sys_id: u8,
    pub comp_id: u8,
    pub msg_id: u8,
    pub payload_len: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HfLinkStats {
    pub frames_ok: u64,
    pub frames_bad_crc: u64,
    pub frames_dropped: u64,
    pub bytes_seen: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HfVehicleState {
    pub time_s: f64,
    pub position_ned_m: [f64; 3],
    pub velocity_ned_mps: [f64; 3],
    /// w, x, y, z; body to NED.
    pub attitude_q: [f64; 4],
    pub estimate_position_ned_m: [f64; 3],
    pub battery_voltage_v: f64,
    /// Flight mode index as carried in HEARTBEAT.
    pub mode: u32,
}

/// Encoder and decoder for one channel of the telemetry protocol.
pub struct HfCodec {
    tx: ChannelState,
    rx: Decoder,
    ready: VecDeque<Frame>,
}

/// A running simulation plus a ground-station uplink channel.
pub struct HfSim {
    sim: Simulation,
    gcs: ChannelState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(HfStatus, String);

impl Failure {
    fn new(status: HfStatus, msg: impl std::fmt::Display) -> Self {
        Self(status, msg.to_string())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            HfStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass pointers obtained from this library or valid C objects.
    unsafe { p.as_ref() }
        .ok_or_else(|| Failure::new(HfStatus::NullPointer, format!("{what} is null")))
}

fn non_null_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: as above, and the caller guarantees exclusive access.
    unsafe { p.as_mut() }
        .ok_or_else(|| Failure::new(HfStatus::NullPointer, format!("{what} is null")))
}

fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(
            HfStatus::NullPointer,
            format!("{what} is null"),
        ));
    }
    // SAFETY: non-null and NUL-terminated per the API contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::new(HfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn bytes<'a>(p: *const u8, len: usize, what: &str) -> Result<&'a [u8], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(
            HfStatus::NullPointer,
            format!("{what} is null"),
        ));
    }
    // SAFETY: the caller guarantees `len` readable bytes at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn copy_out(src: &[u8], buf: *mut u8, cap: usize, written: *mut usize) -> Result<(), Failure> {
    if let Some(w) = unsafe { written.as_mut() } {
        *w = src.len();
    }
    if src.len() > cap {
        return Err(Failure::new(
            HfStatus::BufferTooSmall,
            format!("need {} bytes, buffer holds {cap}", src.len()),
        ));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(Failure::new(HfStatus::NullPointer, "output buffer is null"));
        }
        // SAFETY: `buf` holds at least `cap >= src.len()` bytes.
        unsafe { std::ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len()) };
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message on this thread, without the NUL.
#[no_mangle]
pub extern "C" fn hf_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |m| m.as_bytes().len()))
}

/// Copies the last error message on this thread into `buf` with a trailing
/// NUL, truncating to fit. Returns the number of bytes written excluding the NUL.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null when `cap` is 0.
#[no_mangle]
pub unsafe extern "C" fn hf_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    if buf.is_null() || cap == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let msg = e.as_ref().map_or(&[][..], |m| m.as_bytes());
        let n = msg.len().min(cap - 1);
        std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
        *buf.add(n) = 0;
        n
    })
}

/// Standard-atmosphere density at `altitude_m` with a temperature offset.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_air_density(
    altitude_m: f64,
    temperature_offset_k: f64,
    out: *mut f64,
) -> HfStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = air_density(altitude_m, temperature_offset_k)
            .map_err(|e| Failure::new(HfStatus::InvalidArgument, e))?;
        Ok(())
    })
}

fn sizing(cfg: Result<SizingConfig, Failure>, out: *mut HfSizingReport) -> HfStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        let report = cfg?
            .report()
            .map_err(|e| Failure::new(HfStatus::Config, e))?;
        *out = HfSizingReport::from(&report);
        Ok(())
    })
}

/// Sizing report for the reference vehicle.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_sizing_reference(out: *mut HfSizingReport) -> HfStatus {
    sizing(Ok(SizingConfig::reference()), out)
}

/// Sizing report for a TOML config with `[environment]` and `[powertrain]` tables.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_sizing_from_file(
    path: *const c_char,
    out: *mut HfSizingReport,
) -> HfStatus {
    let cfg = c_str(path, "path").and_then(|p| {
        if !Path::new(p).is_file() {
            return Err(Failure::new(HfStatus::Io, format!("no such file: {p}")));
        }
        SizingConfig::load(p).map_err(|e| Failure::new(HfStatus::Config, e))
    });
    sizing(cfg, out)
}

fn new_codec(reg: Arc<Registry>, sys_id: u8, comp_id: u8) -> *mut HfCodec {
    Box::into_raw(Box::new(HfCodec {
        tx: ChannelState::new(reg.clone(), sys_id, comp_id),
        rx: Decoder::new(reg),
        ready: VecDeque::new(),
    }))
}

/// Codec for the shipped dialect, sending as `sys_id`/`comp_id`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_codec_new(sys_id: u8, comp_id: u8, out: *mut *mut HfCodec) -> HfStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = new_codec(core_registry(), sys_id, comp_id);
        Ok(())
    })
}

/// Codec for a dialect file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_codec_from_dialect(
    path: *const c_char,
    sys_id: u8,
    comp_id: u8,
    out: *mut *mut HfCodec,
) -> HfStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        let path = c_str(path, "path")?;
        let reg = load_schema(path).map_err(|e| Failure::new(HfStatus::Config, e))?;
        *out = new_codec(Arc::new(reg), sys_id, comp_id);
        Ok(())
    })
}

/// # Safety
/// `codec` must come from `hf_codec_new` or `hf_codec_from_dialect`, or be null.
#[no_mangle]
pub unsafe extern "C" fn hf_codec_free(codec: *mut HfCodec) {
    if !codec.is_null() {
        drop(Box::from_raw(codec));
    }
}

/// Encodes message `name` with the listed numeric fields set and the rest
/// zeroed. `written` receives the frame length even when the buffer is too small.
///
/// # Safety
/// `fields` and `values` must hold `count` entries; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn hf_codec_encode(
    codec: *mut HfCodec,
    name: *const c_char,
    fields: *const *const c_char,
    values: *const f64,
    count: usize,
    buf: *mut u8,
    cap: usize,
    written: *mut usize,
) -> HfStatus {
    guard(|| {
        let codec = non_null_mut(codec, "codec")?;
        let name = c_str(name, "name")?;
        let mut pairs = Vec::with_capacity(count);
        if count > 0 {
            non_null(fields, "fields")?;
            non_null(values, "values")?;
            for i in 0..count {
                pairs.push((c_str(*fields.add(i), "field name")?, *values.add(i)));
            }
        }
        let msg = codec
            .tx
            .registry()
            .build(name, &pairs)
            .map_err(|e| Failure::new(HfStatus::InvalidArgument, e))?;
        let frame = codec
            .tx
            .frame(&msg)
            .map_err(|e| Failure::new(HfStatus::Protocol, e))?;
        let crc_extra = codec
            .tx
            .registry()
            .get(frame.msg_id)
            .map_or(0, |s| s.crc_extra);
        copy_out(&frame.to_bytes(crc_extra), buf, cap, written)
    })
}

/// Feeds received bytes; complete frames queue for `hf_codec_next_frame`.
///
/// # Safety
/// `data` must hold `len` bytes; `ready` may be null.
#[no_mangle]
pub unsafe extern "C" fn hf_codec_feed(
    codec: *mut HfCodec,
    data: *const u8,
    len: usize,
    ready: *mut usize,
) -> HfStatus {
    guard(|| {
        let codec = non_null_mut(codec, "codec")?;
        let data = bytes(data, len, "data")?;
        let frames = codec.rx.feed(data);
        codec.ready.extend(frames);
        if let Some(r) = ready.as_mut() {
            *r = codec.ready.len();
        }
        Ok(())
    })
}

/// Pops the oldest decoded frame. `got` is set to 0 when none is queued.
/// The payload is copied into `payload`; a too-small buffer leaves the frame queued.
///
/// # Safety
/// `info` and `got` must be valid; `payload` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn hf_codec_next_frame(
    codec: *mut HfCodec,
    info: *mut HfFrameInfo,
    payload: *mut u8,
    cap: usize,
    got: *mut u8,
) -> HfStatus {
    guard(|| {
        let codec = non_null_mut(codec, "codec")?;
        let info = non_null_mut(info, "info")?;
        let got = non_null_mut(got, "got")?;
        *got = 0;
        let Some(frame) = codec.ready.front() else {
            return Ok(());
        };
        *info = HfFrameInfo {
            seq: frame.seq,
            sys_id: frame.sys_id,
            comp_id: frame.comp_id,
            msg_id: frame.msg_id,
            payload_len: frame.payload.len(),
        };
        copy_out(&frame.payload, payload, cap, std::ptr::null_mut())?;
        codec.ready.pop_front();
        *got = 1;
        Ok(())
    })
}

/// Reads one numeric field (or array element `index`) from a payload.
///
/// # Safety
/// `payload` must hold `len` bytes; `field` must be NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hf_codec_field(
    codec: *const HfCodec,
    msg_id: u8,
    payload: *const u8,
    len: usize,
    field: *const c_char,
    index: usize,
    out: *mut f64,
) -> HfStatus {
    guard(|| {
        let codec = non_null(codec, "codec")?;
        let out = non_null_mut(out, "out")?;
        let field = c_str(field, "field")?;
        let payload = bytes(payload, len, "payload")?;
        let schema = codec.rx.registry().get(msg_id).ok_or_else(|| {
            Failure::new(HfStatus::Protocol, format!("unknown message id {msg_id}"))
        })?;
        let msg = schema
            .unpack(payload)
            .map_err(|e| Failure::new(HfStatus::Protocol, e))?;
        let idx = schema.field_index(field).ok_or_else(|| {
            Failure::new(
                HfStatus::InvalidArgument,
                format!("no field `{field}` in {}", schema.name),
            )
        })?;
        let value = match &msg.values[idx] {
            hexaflight::proto::Value::Array(items) => items.get(index).and_then(|v| v.as_f64()),
            v if index == 0 => v.as_f64(),
            _ => None,
        };
        *out = value.ok_or_else(|| {
            Failure::new(
                HfStatus::InvalidArgument,
                format!("`{field}`[{index}] is not numeric"),
            )
        })?;
        Ok(())
    })
}

/// Decoder counters: good frames, CRC failures and sequence-gap drops.
///
/// # Safety
/// `codec` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hf_codec_stats(codec: *const HfCodec, out: *mut HfLinkStats) -> HfStatus {
    guard(|| {
        let codec = non_null(codec, "codec")?;
        let out = non_null_mut(out, "out")?;
        let s = codec.rx.stats();
        *out = HfLinkStats {
            frames_ok: s.frames_ok,
            frames_bad_crc: s.frames_bad_crc,
            frames_dropped: s.frames_dropped,
            bytes_seen: s.bytes_seen,
        };
        Ok(())
    })
}

fn new_sim(
    scenario: Result<Scenario, Failure>,
    seed: *const u64,
    out: *mut *mut HfSim,
) -> HfStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        let mut s = scenario?;
        // SAFETY: null or a valid pointer per the API contract.
        if let Some(seed) = unsafe { seed.as_ref() } {
            s.seed = Some(*seed);
        }
        s.validate()
            .map_err(|e| Failure::new(HfStatus::Config, e))?;
        let sim = Simulation::new(&s).map_err(|e| Failure::new(HfStatus::Simulation, e))?;
        let gcs = ChannelState::new(sim.registry().clone(), GCS_SYS, GCS_COMP);
        *out = Box::into_raw(Box::new(HfSim { sim, gcs }));
        Ok(())
    })
}

/// Simulation from a scenario file. `seed` overrides the scenario seed when non-null.
///
/// # Safety
/// `path` must be NUL-terminated; `seed` null or valid; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hf_sim_from_file(
    path: *const c_char,
    seed: *const u64,
    out: *mut *mut HfSim,
) -> HfStatus {
    let s = c_str(path, "path").and_then(|p| {
        if !Path::new(p).is_file() {
            return Err(Failure::new(HfStatus::Io, format!("no such file: {p}")));
        }
        Scenario::load(p).map_err(|e| Failure::new(HfStatus::Config, e))
    });
    new_sim(s, seed, out)
}

/// Simulation from scenario TOML text.
///
/// # Safety
/// `toml` must be NUL-terminated; `seed` null or valid; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hf_sim_from_toml(
    toml: *const c_char,
    seed: *const u64,
    out: *mut *mut HfSim,
) -> HfStatus {
    let s = c_str(toml, "toml")
        .and_then(|t| Scenario::from_toml(t).map_err(|e| Failure::new(HfStatus::Config, e)));
    new_sim(s, seed, out)
}

/// # Safety
/// `sim` must come from `hf_sim_from_file` or `hf_sim_from_toml`, or be null.
#[no_mangle]
pub unsafe extern "C" fn hf_sim_free(sim: *mut HfSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances simulated time to `t_s`.
///
/// # Safety
/// `sim` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hf_sim_run_until(sim: *mut HfSim, t_s: f64) -> HfStatus {
    guard(|| {
        let h = non_null_mut(sim, "sim")?;
        if !t_s.is_finite() {
            return Err(Failure::new(
                HfStatus::InvalidArgument,
                "time is not finite",
            ));
        }
        h.sim
            .run_until(t_s)
            .map_err(|e| Failure::new(HfStatus::Simulation, e))
    })
}

/// Sends an operator command over the simulated uplink.
///
/// # Safety
/// `sim` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hf_sim_command(
    sim: *mut HfSim,
    command: HfCommand,
    param: f64,
) -> HfStatus {
    guard(|| {
        let h = non_null_mut(sim, "sim")?;
        let cmd = match command {
            HfCommand::Arm => Command::Arm,
            HfCommand::Disarm => Command::Disarm,
            HfCommand::Takeoff => Command::Takeoff {
                altitude_m: (param > 0.0).then_some(param),
            },
            HfCommand::Land => Command::Land,
            HfCommand::ReturnToLaunch => Command::ReturnToLaunch,
            HfCommand::MissionStart => Command::MissionStart,
            HfCommand::FailsafeReset => Command::FailsafeReset,
            HfCommand::SetMode => {
                let mode = (param >= 0.0 && param.fract() == 0.0)
                    .then(|| FlightMode::from_custom_mode(param as u32))
                    .flatten()
                    .ok_or_else(|| {
                        Failure::new(HfStatus::InvalidArgument, format!("no flight mode {param}"))
                    })?;
                Command::SetMode(mode)
            }
        };
        let msgs = command_messages(h.sim.registry(), &cmd)
            .map_err(|e| Failure::new(HfStatus::Protocol, e))?;
        for m in &msgs {
            let raw = h
                .gcs
                .encode(m)
                .map_err(|e| Failure::new(HfStatus::Protocol, e))?;
            h.sim.inject_uplink(&raw);
        }
        Ok(())
    })
}

/// Sends raw protocol bytes over the simulated uplink.
///
/// # Safety
/// `sim` must be valid; `data` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn hf_sim_inject(sim: *mut HfSim, data: *const u8, len: usize) -> HfStatus {
    guard(|| {
        let h = non_null_mut(sim, "sim")?;
        h.sim.inject_uplink(bytes(data, len, "data")?);
        Ok(())
    })
}

/// Truth and estimate snapshot.
///
/// # Safety
/// `sim` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hf_sim_state(sim: *const HfSim, out: *mut HfVehicleState) -> HfStatus {
    guard(|| {
        let h = non_null(sim, "sim")?;
        let out = non_null_mut(out, "out")?;
        let t = h.sim.truth();
        let q = t.attitude_q.quaternion();
        *out = HfVehicleState {
            time_s: h.sim.time_s(),
            position_ned_m: t.position_ned_m.into(),
            velocity_ned_mps: t.velocity_ned_mps.into(),
            attitude_q: [q.w, q.i, q.j, q.k],
            estimate_position_ned_m: h.sim.estimate().position_ned_m.into(),
            battery_voltage_v: h.sim.battery().voltage_v,
            mode: h.sim.mode().to_custom_mode(),
        };
        Ok(())
    })
}

/// Writes session.tlog, truth.csv and events.log for the run so far.
///
/// # Safety
/// `sim` must be valid; `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hf_sim_write_outputs(sim: *const HfSim, dir: *const c_char) -> HfStatus {
    guard(|| {
        let h = non_null(sim, "sim")?;
        let dir = c_str(dir, "dir")?;
        h.sim
            .log()
            .write_dir(Path::new(dir))
            .map_err(|e| Failure::new(HfStatus::Io, e))
    })
}
