//! Frame layout, sequence stamping and the incremental stream decoder.
//!
//! ```text
//! +------+-----+-----+--------+---------+--------+-----------------+---------+
//! | 0xFE | len | seq | sys_id | comp_id | msg_id | payload (len B) | crc LE  |
//! +------+-----+-----+--------+---------+--------+-----------------+---------+
//! ```
//!
//! The checksum covers `len` through the last payload byte, then the
//! message's `crc_extra` seed.

use std::collections::HashMap;
use std::sync::Arc;

use super::crc::crc16_with_extra;
use super::schema::{Message, Registry};
use super::ProtoError;

pub const STX: u8 = 0xFE;
pub const HEADER_LEN: usize = 6;
pub const FRAME_OVERHEAD: usize = 8;

/// One decoded or to-be-sent packet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    pub seq: u8,
    pub sys_id: u8,
    pub comp_id: u8,
    pub msg_id: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn encoded_len(&self) -> usize {
        self.payload.len() + FRAME_OVERHEAD
    }

    pub fn to_bytes(&self, crc_extra: u8) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.push(STX);
        out.push(self.payload.len() as u8);
        out.push(self.seq);
        out.push(self.sys_id);
        out.push(self.comp_id);
        out.push(self.msg_id);
        out.extend_from_slice(&self.payload);
        let crc = crc16_with_extra(&out[1..], crc_extra);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Decodes the payload against the registry.
    pub fn message(&self, registry: &Registry) -> Result<Message, ProtoError> {
        registry
            .get(self.msg_id)
            .ok_or(ProtoError::UnknownId(self.msg_id))?
            .unpack(&self.payload)
    }

    /// Deduplication key used by redundant-link bridges.
    pub fn origin_key(&self) -> (u8, u8, u8) {
        (self.sys_id, self.comp_id, self.seq)
    }
}

/// Sender identity plus the wrapping sequence counter of one outgoing link.
#[derive(Debug, Clone)]
pub struct ChannelState {
    pub sys_id: u8,
    pub comp_id: u8,
    next_seq: u8,
    registry: Arc<Registry>,
}

impl ChannelState {
    pub fn new(registry: Arc<Registry>, sys_id: u8, comp_id: u8) -> Self {
        Self {
            sys_id,
            comp_id,
            next_seq: 0,
            registry,
        }
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn next_seq(&self) -> u8 {
        self.next_seq
    }

    /// Packs `msg`, stamps the next sequence number and returns the frame.
    pub fn frame(&mut self, msg: &Message) -> Result<Frame, ProtoError> {
        let schema = self
            .registry
            .get(msg.msg_id)
            .ok_or(ProtoError::UnknownId(msg.msg_id))?;
        let payload = schema.pack(msg)?;
        let frame = Frame {
            seq: self.next_seq,
            sys_id: self.sys_id,
            comp_id: self.comp_id,
            msg_id: msg.msg_id,
            payload,
        };
        self.next_seq = self.next_seq.wrapping_add(1);
        Ok(frame)
    }

    pub fn encode(&mut self, msg: &Message) -> Result<Vec<u8>, ProtoError> {
        let frame = self.frame(msg)?;
        let extra = self
            .registry
            .get(msg.msg_id)
            .map(|s| s.crc_extra)
            .unwrap_or(0);
        Ok(frame.to_bytes(extra))
    }
}

/// Encodes a single frame using the registry's seed.
pub fn encode_frame(frame: &Frame, registry: &Registry) -> Result<Vec<u8>, ProtoError> {
    let schema = registry
        .get(frame.msg_id)
        .ok_or(ProtoError::UnknownId(frame.msg_id))?;
    Ok(frame.to_bytes(schema.crc_extra))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub frames_ok: u64,
    pub frames_bad_crc: u64,
    /// Sum of sequence gap sizes across all senders.
    pub frames_dropped: u64,
    pub bytes_seen: u64,
}

impl LinkStats {
    /// Fraction of frames lost among those that should have arrived.
    pub fn loss_fraction(&self) -> f64 {
        let expected = self.frames_ok + self.frames_dropped;
        if expected == 0 {
            0.0
        } else {
            self.frames_dropped as f64 / expected as f64
        }
    }
}

/// Incremental decoder. Feed it arbitrary byte chunks; it yields every
/// frame whose checksum verifies and resynchronizes on the next start byte
/// after any corruption.
#[derive(Debug)]
pub struct Decoder {
    registry: Arc<Registry>,
    buf: Vec<u8>,
    stats: LinkStats,
    last_seq: HashMap<(u8, u8), u8>,
}

impl Decoder {
    pub fn new(registry: Arc<Registry>) -> Self {
        Self {
            registry,
            buf: Vec::with_capacity(512),
            stats: LinkStats::default(),
            last_seq: HashMap::new(),
        }
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    /// Bytes held while waiting for the rest of a candidate frame.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    pub fn feed(&mut self, bytes: &[u8]) -> Vec<Frame> {
        let mut out = Vec::new();
        self.feed_into(bytes, &mut out);
        out
    }

    pub fn feed_into(&mut self, bytes: &[u8], out: &mut Vec<Frame>) {
        self.stats.bytes_seen += bytes.len() as u64;
        self.buf.extend_from_slice(bytes);
        let mut start = 0;
        loop {
            match self.buf[start..].iter().position(|&b| b == STX) {
                Some(off) => start += off,
                None => {
                    start = self.buf.len();
                    break;
                }
            }
            let avail = &self.buf[start..];
            if avail.len() < 2 {
                break;
            }
            let need = usize::from(avail[1]) + FRAME_OVERHEAD;
            if avail.len() < need {
                break;
            }
            match self.try_frame(&avail[..need]) {
                Some(frame) => {
                    self.account_seq(&frame);
                    self.stats.frames_ok += 1;
                    out.push(frame);
                    start += need;
                }
                None => {
                    self.stats.frames_bad_crc += 1;
                    start += 1;
                }
            }
        }
        self.buf.drain(..start);
    }

    fn try_frame(&self, raw: &[u8]) -> Option<Frame> {
        let len = usize::from(raw[1]);
        let msg_id = raw[5];
        let schema = self.registry.get(msg_id)?;
        if schema.payload_len() != len {
            return None;
        }
        let body_end = HEADER_LEN + len;
        let crc = u16::from_le_bytes([raw[body_end], raw[body_end + 1]]);
        if crc16_with_extra(&raw[1..body_end], schema.crc_extra) != crc {
            return None;
        }
        Some(Frame {
            seq: raw[2],
            sys_id: raw[3],
            comp_id: raw[4],
            msg_id,
            payload: raw[HEADER_LEN..body_end].to_vec(),
        })
    }

    fn account_seq(&mut self, frame: &Frame) {
        let key = (frame.sys_id, frame.comp_id);
        if let Some(prev) = self.last_seq.insert(key, frame.seq) {
            let gap = frame.seq.wrapping_sub(prev).wrapping_sub(1);
            // gap of 255 is a repeated sequence number, not 255 losses
            if gap != u8::MAX {
                self.stats.frames_dropped += u64::from(gap);
            }
        }
    }
}

/// Parses a complete encoded frame (used when reading logs).
pub fn decode_frame(raw: &[u8], registry: &Registry) -> Result<Frame, ProtoError> {
    if raw.len() < FRAME_OVERHEAD || raw[0] != STX {
        return Err(ProtoError::Malformed(
            "missing start byte or short frame".into(),
        ));
    }
    let len = usize::from(raw[1]);
    if raw.len() != len + FRAME_OVERHEAD {
        return Err(ProtoError::Malformed(format!(
            "length byte {len} does not match frame size {}",
            raw.len()
        )));
    }
    let schema = registry.get(raw[5]).ok_or(ProtoError::UnknownId(raw[5]))?;
    let body_end = HEADER_LEN + len;
    let crc = u16::from_le_bytes([raw[body_end], raw[body_end + 1]]);
    if crc16_with_extra(&raw[1..body_end], schema.crc_extra) != crc {
        return Err(ProtoError::BadCrc);
    }
    Ok(Frame {
        seq: raw[2],
        sys_id: raw[3],
        comp_id: raw[4],
        msg_id: raw[5],
        payload: raw[HEADER_LEN..body_end].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proto::schema::core_registry;

    fn heartbeat(chan: &mut ChannelState) -> Vec<u8> {
        let msg = chan
            .registry()
            .build("HEARTBEAT", &[("type", 13.0)])
            .unwrap();
        chan.encode(&msg).unwrap()
    }

    #[test]
    fn nine_byte_payload_gives_seventeen_byte_frame() {
        let mut chan = ChannelState::new(core_registry(), 1, 1);
        assert_eq!(heartbeat(&mut chan).len(), 17);
    }

    #[test]
    fn sequence_wraps() {
        let mut chan = ChannelState::new(core_registry(), 1, 1);
        let mut last = 0;
        for _ in 0..257 {
            last = heartbeat(&mut chan)[2];
        }
        assert_eq!(last, 0);
        assert_eq!(chan.next_seq(), 1);
    }

    fn frames_with_seqs(seqs: &[u8]) -> Vec<u8> {
        let reg = core_registry();
        let msg = reg.build("HEARTBEAT", &[]).unwrap();
        let payload = reg.by_name("HEARTBEAT").unwrap().pack(&msg).unwrap();
        let extra = reg.by_name("HEARTBEAT").unwrap().crc_extra;
        seqs.iter()
            .flat_map(|&seq| {
                Frame {
                    seq,
                    sys_id: 1,
                    comp_id: 1,
                    msg_id: 0,
                    payload: payload.clone(),
                }
                .to_bytes(extra)
            })
            .collect()
    }

    #[test]
    fn gap_counts_dropped_frames() {
        let mut dec = Decoder::new(core_registry());
        dec.feed(&frames_with_seqs(&[0, 1, 2, 4]));
        assert_eq!(dec.stats().frames_ok, 4);
        assert_eq!(dec.stats().frames_dropped, 1);

        let mut dec = Decoder::new(core_registry());
        dec.feed(&frames_with_seqs(&[254, 255, 0, 1]));
        assert_eq!(dec.stats().frames_dropped, 0);

        let mut dec = Decoder::new(core_registry());
        dec.feed(&frames_with_seqs(&[10, 20]));
        assert_eq!(dec.stats().frames_dropped, 9);
    }

    #[test]
    fn bad_crc_is_counted_and_stream_continues() {
        let mut bytes = frames_with_seqs(&[0, 1, 2]);
        bytes[17 + 7] ^= 0x40;
        let mut dec = Decoder::new(core_registry());
        let frames = dec.feed(&bytes);
        assert_eq!(frames.len(), 2);
        assert!(dec.stats().frames_bad_crc >= 1);
    }

    #[test]
    fn byte_at_a_time_feeding() {
        let bytes = frames_with_seqs(&[5, 6, 7]);
        let mut dec = Decoder::new(core_registry());
        let frames: Vec<Frame> = bytes
            .iter()
            .flat_map(|b| dec.feed(std::slice::from_ref(b)))
            .collect();
        assert_eq!(
            frames.iter().map(|f| f.seq).collect::<Vec<_>>(),
            vec![5, 6, 7]
        );
        assert_eq!(dec.pending(), 0);
    }

    #[test]
    fn decode_frame_round_trip() {
        let reg = core_registry();
        let mut chan = ChannelState::new(reg.clone(), 7, 3);
        let msg = reg
            .build("ATTITUDE", &[("roll", 0.25), ("time_boot_ms", 99.0)])
            .unwrap();
        let bytes = chan.encode(&msg).unwrap();
        let frame = decode_frame(&bytes, &reg).unwrap();
        assert_eq!(frame.message(&reg).unwrap(), msg);
        let mut broken = bytes.clone();
        broken[8] ^= 1;
        assert!(matches!(
            decode_frame(&broken, &reg),
            Err(ProtoError::BadCrc)
        ));
    }
}
