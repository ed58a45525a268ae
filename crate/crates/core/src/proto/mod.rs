//! Schema-driven telemetry protocol: 8 bytes of framing around each payload,
//! a CRC seeded per message type, sequence-gap drop detection and a
//! timestamped log format.

pub mod crc;
pub mod frame;
pub mod schema;
pub mod tlog;

use thiserror::Error;

pub use crc::{crc16, crc16_with_extra};
pub use frame::{
    decode_frame, encode_frame, ChannelState, Decoder, Frame, LinkStats, FRAME_OVERHEAD, STX,
};
pub use schema::{
    compute_crc_extra, core_registry, load_schema, parse_schema, FieldSchema, FieldType, Message,
    MessageSchema, Registry, ScalarType, Value, CORE_DIALECT,
};
pub use tlog::{tlog_read, tlog_read_file, tlog_write, TlogRecord, TlogWriter};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtoError {
    #[error("schema error in message `{message}`: {reason}")]
    Schema { message: String, reason: String },
    #[error("unknown message `{0}`")]
    UnknownMessage(String),
    #[error("unknown message id {0}")]
    UnknownId(u8),
    #[error("value does not match schema of `{message}` (field `{field}`)")]
    ValueMismatch { message: String, field: String },
    #[error("payload length mismatch for `{message}`: expected {expected}, got {actual}")]
    PayloadLength {
        message: String,
        expected: usize,
        actual: usize,
    },
    #[error("checksum mismatch")]
    BadCrc,
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for ProtoError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

/// Well-known message ids of the shipped dialect.
pub mod ids {
    pub const HEARTBEAT: u8 = 0;
    pub const SYS_STATUS: u8 = 1;
    pub const SET_MODE: u8 = 11;
    pub const GPS_RAW: u8 = 24;
    pub const ATTITUDE: u8 = 30;
    pub const LOCAL_POSITION: u8 = 32;
    pub const MISSION_ITEM: u8 = 39;
    pub const RC_CHANNELS: u8 = 65;
    pub const COMMAND: u8 = 76;
    pub const COMMAND_ACK: u8 = 77;
    pub const TRACK_STATUS: u8 = 200;
    pub const VISION_FRAME: u8 = 201;
    pub const STATUSTEXT: u8 = 253;
}

/// Command codes carried in `COMMAND.command`.
pub mod commands {
    pub const RETURN_TO_LAUNCH: u16 = 20;
    pub const LAND: u16 = 21;
    pub const TAKEOFF: u16 = 22;
    pub const MISSION_START: u16 = 300;
    pub const ARM_DISARM: u16 = 400;
    pub const FAILSAFE_RESET: u16 = 401;
}
