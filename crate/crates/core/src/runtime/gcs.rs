//! Operator messages in both directions: building uplink commands on the
//! ground side and interpreting them on the vehicle side.

use crate::control::{Command, FlightMode, Mission, RcInput, Waypoint};
use crate::proto::{commands, ids, Message, ProtoError, Registry, Value};

pub const VEHICLE_SYS: u8 = 1;
pub const VEHICLE_COMP: u8 = 1;
pub const GCS_SYS: u8 = 255;
pub const GCS_COMP: u8 = 190;

/// HEARTBEAT.type values.
pub const TYPE_HEXAROTOR: f64 = 13.0;
pub const TYPE_GCS: f64 = 6.0;

pub const ACK_ACCEPTED: u8 = 0;
pub const ACK_DENIED: u8 = 2;
pub const ACK_FAILED: u8 = 4;

pub const STATUSTEXT_LEN: usize = 50;

/// Message ids a client may send to the vehicle.
pub const UPLINK_IDS: [u8; 5] = [
    ids::HEARTBEAT,
    ids::SET_MODE,
    ids::MISSION_ITEM,
    ids::RC_CHANNELS,
    ids::COMMAND,
];

/// Uplink ids that change vehicle state and need control authority.
pub fn needs_authority(msg_id: u8) -> bool {
    matches!(
        msg_id,
        ids::SET_MODE | ids::MISSION_ITEM | ids::RC_CHANNELS | ids::COMMAND
    )
}

pub fn parse_mode(name: &str) -> Option<FlightMode> {
    let n = name.trim().to_ascii_uppercase();
    FlightMode::ALL
        .iter()
        .copied()
        .find(|m| m.name() == n || format!("{m:?}").to_ascii_uppercase() == n)
}

/// Uplink messages for one command. Missions expand to one item per waypoint.
pub fn command_messages(reg: &Registry, cmd: &Command) -> Result<Vec<Message>, ProtoError> {
    let long = |id: u16, p1: f64| {
        reg.build(
            "COMMAND",
            &[
                ("target_system", VEHICLE_SYS as f64),
                ("target_component", VEHICLE_COMP as f64),
                ("command", id as f64),
                ("param1", p1),
            ],
        )
    };
    Ok(match cmd {
        Command::Arm => vec![long(commands::ARM_DISARM, 1.0)?],
        Command::Disarm => vec![long(commands::ARM_DISARM, 0.0)?],
        Command::Takeoff { altitude_m } => {
            vec![long(commands::TAKEOFF, altitude_m.unwrap_or(0.0))?]
        }
        Command::Land => vec![long(commands::LAND, 0.0)?],
        Command::ReturnToLaunch => vec![long(commands::RETURN_TO_LAUNCH, 0.0)?],
        Command::MissionStart => vec![long(commands::MISSION_START, 0.0)?],
        Command::FailsafeReset => vec![long(commands::FAILSAFE_RESET, 0.0)?],
        Command::SetMode(m) => vec![reg.build(
            "SET_MODE",
            &[
                ("custom_mode", m.to_custom_mode() as f64),
                ("target_system", VEHICLE_SYS as f64),
            ],
        )?],
        Command::UploadMission(mission) => {
            let count = mission.waypoints.len() as f64;
            mission
                .waypoints
                .iter()
                .enumerate()
                .map(|(i, wp)| {
                    reg.build(
                        "MISSION_ITEM",
                        &[
                            ("target_system", VEHICLE_SYS as f64),
                            ("target_component", VEHICLE_COMP as f64),
                            ("seq", i as f64),
                            ("count", count),
                            ("x", wp.position_ned[0]),
                            ("y", wp.position_ned[1]),
                            ("z", wp.position_ned[2]),
                            ("hold_s", wp.hold_s),
                            ("acceptance_radius", wp.acceptance_radius_m),
                        ],
                    )
                })
                .collect::<Result<_, _>>()?
        }
    })
}

pub fn gcs_heartbeat(reg: &Registry) -> Message {
    reg.build("HEARTBEAT", &[("type", TYPE_GCS), ("mavlink_version", 1.0)])
        .expect("core dialect has HEARTBEAT")
}

pub fn rc_message(reg: &Registry, rc: &RcInput, time_boot_ms: u32) -> Message {
    let mut msg = reg
        .build(
            "RC_CHANNELS",
            &[
                ("time_boot_ms", time_boot_ms as f64),
                ("chancount", 4.0),
                ("rssi", 255.0),
            ],
        )
        .expect("core dialect has RC_CHANNELS");
    let schema = reg.get(ids::RC_CHANNELS).expect("RC_CHANNELS");
    let idx = schema.field_index("chan").expect("chan field");
    let pwm = rc.to_pwm();
    let mut chan = vec![Value::U16(0); 8];
    for (slot, p) in chan.iter_mut().zip(pwm) {
        *slot = Value::U16(p);
    }
    msg.values[idx] = Value::Array(chan);
    msg
}

pub fn statustext(reg: &Registry, severity: u8, text: &str) -> Message {
    let mut msg = reg
        .build("STATUSTEXT", &[("severity", severity as f64)])
        .expect("core dialect has STATUSTEXT");
    let idx = reg
        .get(ids::STATUSTEXT)
        .and_then(|s| s.field_index("text"))
        .expect("text field");
    let mut bytes: Vec<Value> = text
        .bytes()
        .map(|b| if b.is_ascii() { b } else { b'?' })
        .take(STATUSTEXT_LEN)
        .map(Value::U8)
        .collect();
    bytes.resize(STATUSTEXT_LEN, Value::U8(0));
    msg.values[idx] = Value::Array(bytes);
    msg
}

/// Text of a STATUSTEXT message, trailing zeros removed.
pub fn statustext_string(reg: &Registry, msg: &Message) -> Option<String> {
    match reg.field_value(msg, "text")? {
        Value::Array(items) => Some(
            items
                .iter()
                .filter_map(|v| match v {
                    Value::U8(b) if *b != 0 => Some(*b as char),
                    _ => None,
                })
                .collect(),
        ),
        _ => None,
    }
}

pub fn command_ack(reg: &Registry, command: u16, result: u8) -> Message {
    reg.build(
        "COMMAND_ACK",
        &[("command", command as f64), ("result", result as f64)],
    )
    .expect("core dialect has COMMAND_ACK")
}

/// One mission item as received.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionItem {
    pub seq: u16,
    pub count: u16,
    pub waypoint: Waypoint,
}

/// Vehicle-side meaning of an uplink message.
#[derive(Debug, Clone, PartialEq)]
pub enum Uplink {
    Heartbeat,
    /// `ack_id` is echoed in COMMAND_ACK.command.
    Command {
        command: Command,
        ack_id: u16,
    },
    Rc(RcInput),
    MissionItem(MissionItem),
}

/// Interprets a message received from a client.
pub fn decode_uplink(reg: &Registry, msg: &Message) -> Result<Uplink, String> {
    let f = |name: &str| {
        reg.field(msg, name)
            .ok_or_else(|| format!("missing field {name}"))
    };
    match msg.msg_id {
        ids::HEARTBEAT => Ok(Uplink::Heartbeat),
        ids::SET_MODE => {
            let raw = f("custom_mode")? as u32;
            let mode =
                FlightMode::from_custom_mode(raw).ok_or_else(|| format!("unknown mode {raw}"))?;
            Ok(Uplink::Command {
                command: Command::SetMode(mode),
                ack_id: ids::SET_MODE as u16,
            })
        }
        ids::COMMAND => {
            let id = f("command")? as u16;
            let p1 = f("param1")?;
            let command = match id {
                commands::ARM_DISARM if p1 >= 0.5 => Command::Arm,
                commands::ARM_DISARM => Command::Disarm,
                commands::TAKEOFF => Command::Takeoff {
                    altitude_m: (p1 > 0.0).then_some(p1),
                },
                commands::LAND => Command::Land,
                commands::RETURN_TO_LAUNCH => Command::ReturnToLaunch,
                commands::MISSION_START => Command::MissionStart,
                commands::FAILSAFE_RESET => Command::FailsafeReset,
                other => return Err(format!("unsupported command {other}")),
            };
            Ok(Uplink::Command {
                command,
                ack_id: id,
            })
        }
        ids::RC_CHANNELS => {
            let chan = match reg.field_value(msg, "chan") {
                Some(Value::Array(items)) => items
                    .iter()
                    .filter_map(|v| v.as_f64())
                    .map(|x| x as u16)
                    .collect::<Vec<_>>(),
                _ => return Err("missing channels".into()),
            };
            let count = (f("chancount")? as usize).min(chan.len());
            RcInput::from_pwm(&chan[..count])
                .map(Uplink::Rc)
                .ok_or_else(|| "fewer than four RC channels".into())
        }
        ids::MISSION_ITEM => Ok(Uplink::MissionItem(MissionItem {
            seq: f("seq")? as u16,
            count: f("count")? as u16,
            waypoint: Waypoint {
                position_ned: [f("x")?, f("y")?, f("z")?],
                hold_s: f("hold_s")?,
                acceptance_radius_m: f("acceptance_radius")?,
            },
        })),
        other => Err(format!("message id {other} is not accepted from clients")),
    }
}

/// Collects mission items until a complete mission has arrived.
#[derive(Debug, Clone, Default)]
pub struct MissionAssembler {
    count: u16,
    items: Vec<Option<Waypoint>>,
}

impl MissionAssembler {
    /// Returns the mission once every item `0..count` has been received.
    /// An item with a different count restarts the upload.
    pub fn push(&mut self, item: MissionItem) -> Option<Mission> {
        if item.count == 0 || item.seq >= item.count {
            return None;
        }
        if item.count != self.count || item.seq == 0 {
            self.count = item.count;
            self.items = vec![None; item.count as usize];
        }
        self.items[item.seq as usize] = Some(item.waypoint);
        if self.items.iter().all(Option::is_some) {
            let waypoints = self.items.drain(..).flatten().collect();
            self.count = 0;
            return Some(Mission::new(waypoints));
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proto::core_registry;
    use nalgebra::Vector3;

    fn round_trip(cmd: Command) -> Command {
        let reg = core_registry();
        let msgs = command_messages(&reg, &cmd).unwrap();
        assert_eq!(msgs.len(), 1);
        match decode_uplink(&reg, &msgs[0]).unwrap() {
            Uplink::Command { command, .. } => command,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn commands_round_trip() {
        for cmd in [
            Command::Arm,
            Command::Disarm,
            Command::Takeoff {
                altitude_m: Some(7.5),
            },
            Command::Takeoff { altitude_m: None },
            Command::Land,
            Command::ReturnToLaunch,
            Command::MissionStart,
            Command::FailsafeReset,
            Command::SetMode(FlightMode::Track),
        ] {
            assert_eq!(round_trip(cmd.clone()), cmd);
        }
    }

    #[test]
    fn mission_upload_reassembles() {
        let reg = core_registry();
        let mission = Mission::new(vec![
            Waypoint::new(Vector3::new(10.0, 0.0, -10.0), 2.0, 1.0),
            Waypoint::new(Vector3::new(10.0, 10.0, -12.0), 0.0, 1.5),
        ]);
        let msgs = command_messages(&reg, &Command::UploadMission(mission.clone())).unwrap();
        let mut asm = MissionAssembler::default();
        let mut done = None;
        for m in &msgs {
            if let Uplink::MissionItem(item) = decode_uplink(&reg, m).unwrap() {
                done = asm.push(item);
            }
        }
        assert_eq!(done, Some(mission));
    }

    #[test]
    fn rc_round_trip() {
        let reg = core_registry();
        let rc = RcInput {
            roll: 0.5,
            pitch: -0.25,
            yaw: 0.0,
            throttle: 0.75,
        };
        match decode_uplink(&reg, &rc_message(&reg, &rc, 10)).unwrap() {
            Uplink::Rc(got) => {
                assert!((got.roll - 0.5).abs() < 1e-2);
                assert!((got.pitch + 0.25).abs() < 1e-2);
                assert!((got.throttle - 0.75).abs() < 1e-2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn telemetry_ids_rejected_from_clients() {
        let reg = core_registry();
        let att = reg.build("ATTITUDE", &[]).unwrap();
        assert!(decode_uplink(&reg, &att).is_err());
    }

    #[test]
    fn statustext_truncates_and_pads() {
        let reg = core_registry();
        let long = "x".repeat(80);
        let m = statustext(&reg, 4, &long);
        assert_eq!(statustext_string(&reg, &m).unwrap().len(), STATUSTEXT_LEN);
        let m = statustext(&reg, 4, "hello");
        assert_eq!(statustext_string(&reg, &m).unwrap(), "hello");
    }

    #[test]
    fn mode_names_parse() {
        assert_eq!(parse_mode("poshold"), Some(FlightMode::PositionHold));
        assert_eq!(parse_mode("PositionHold"), Some(FlightMode::PositionHold));
        assert_eq!(parse_mode("nope"), None);
    }
}
