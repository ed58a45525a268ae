use std::collections::HashSet;

use hexaflight::bus::{Bridge, ImpairedLink, LinkConfig};
use hexaflight::proto::{
    core_registry, crc16, decode_frame, ChannelState, Decoder, FieldType, Message, MessageSchema,
    ScalarType, Value, FRAME_OVERHEAD,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bitwise CRC-16/MCRF4XX.
pub fn crc_oracle(bytes: &[u8]) -> u16 {
    let mut c: u16 = 0xFFFF;
    for &b in bytes {
        c ^= u16::from(b);
        for _ in 0..8 {
            c = if c & 1 != 0 {
                (c >> 1) ^ 0x8408
            } else {
                c >> 1
            };
        }
    }
    c
}

fn random_scalar(ty: ScalarType, rng: &mut ChaCha8Rng) -> Value {
    match ty {
        ScalarType::U8 => Value::U8(rng.gen()),
        ScalarType::I8 => Value::I8(rng.gen()),
        ScalarType::U16 => Value::U16(rng.gen()),
        ScalarType::I16 => Value::I16(rng.gen()),
        ScalarType::U32 => Value::U32(rng.gen()),
        ScalarType::I32 => Value::I32(rng.gen()),
        ScalarType::U64 => Value::U64(rng.gen()),
        ScalarType::I64 => Value::I64(rng.gen()),
        // arbitrary bit patterns, NaNs included
        ScalarType::F32 => Value::F32(f32::from_bits(rng.gen())),
        ScalarType::F64 => Value::F64(f64::from_bits(rng.gen())),
    }
}

fn random_value(ty: &FieldType, rng: &mut ChaCha8Rng) -> Value {
    match ty.array_len {
        None => random_scalar(ty.scalar, rng),
        Some(n) => Value::Array((0..n).map(|_| random_scalar(ty.scalar, rng)).collect()),
    }
}

pub fn random_message(schema: &MessageSchema, rng: &mut ChaCha8Rng) -> Message {
    Message {
        msg_id: schema.msg_id,
        values: schema
            .fields
            .iter()
            .map(|f| random_value(&f.ty, rng))
            .collect(),
    }
}

#[derive(Debug, Default)]
pub struct OverheadReport {
    pub messages: usize,
    pub types_covered: usize,
    pub wrong_overhead: usize,
    pub roundtrip_failures: usize,
    pub crc_mismatches: usize,
}

/// Encodes `n` random messages across every core type; checks size,
/// bit-exact round trip and the CRC against the bitwise oracle.
pub fn protocol_overhead(n: usize, seed: u64) -> OverheadReport {
    let reg = core_registry();
    let schemas: Vec<&MessageSchema> = reg.schemas().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tx = ChannelState::new(reg.clone(), 1, 1);
    let mut rx = Decoder::new(reg.clone());
    let mut seen = HashSet::new();
    let mut r = OverheadReport::default();
    for i in 0..n {
        let schema = schemas[i % schemas.len()];
        seen.insert(schema.msg_id);
        let msg = random_message(schema, &mut rng);
        let payload = schema.pack(&msg).unwrap();
        let raw = tx.encode(&msg).unwrap();
        r.messages += 1;
        if raw.len() - payload.len() != FRAME_OVERHEAD || FRAME_OVERHEAD != 8 {
            r.wrong_overhead += 1;
        }
        let mut body = raw[1..raw.len() - 2].to_vec();
        body.push(schema.crc_extra);
        if crc_oracle(&body).to_le_bytes() != raw[raw.len() - 2..] {
            r.crc_mismatches += 1;
        }
        let frames = rx.feed(&raw);
        let back = frames.first().map(|f| f.message(&reg).unwrap());
        let repacked = back.as_ref().map(|m| schema.pack(m).unwrap());
        let direct = decode_frame(&raw, &reg).map(|f| f.payload).ok();
        if frames.len() != 1
            || repacked.as_deref() != Some(&payload[..])
            || direct.as_deref() != Some(&payload[..])
        {
            r.roundtrip_failures += 1;
        }
    }
    r.types_covered = seen.len();
    r
}

pub fn crc_check_value() -> u16 {
    crc16(b"123456789")
}

#[derive(Debug)]
pub struct DropReport {
    pub reported: u64,
    pub injected: u64,
    pub fraction: f64,
}

/// Sends `n` frames over a seeded lossy link between two frames that always
/// arrive, so that every loss is bracketed by deliveries.
pub fn drop_detection(n: usize, drop_rate: f64, seed: u64) -> DropReport {
    let reg = core_registry();
    let mut tx = ChannelState::new(reg.clone(), 1, 1);
    let mut rx = Decoder::new(reg.clone());
    let mut link = ImpairedLink::new(LinkConfig::lossy(drop_rate), seed);
    let hb = reg.build("HEARTBEAT", &[("type", 13.0)]).unwrap();
    rx.feed(&tx.encode(&hb).unwrap());
    for i in 0..n {
        let raw = tx.encode(&hb).unwrap();
        link.send(&raw, i as u64);
        for (_, bytes) in link.poll(i as u64) {
            rx.feed(&bytes);
        }
    }
    rx.feed(&tx.encode(&hb).unwrap());
    let s = rx.stats();
    DropReport {
        reported: s.frames_dropped,
        injected: link.stats().dropped,
        fraction: s.loss_fraction(),
    }
}

#[derive(Debug)]
pub struct RedundancyReport {
    pub sent: usize,
    pub unique_delivered: usize,
    pub duplicates_out: usize,
    pub suppressed: u64,
}

/// Sends `n` frames over two independent lossy links into a deduplicating bridge.
pub fn redundant_links(n: usize, drop_rate: f64, seed: u64) -> RedundancyReport {
    let reg = core_registry();
    let mut tx = ChannelState::new(reg.clone(), 1, 1);
    let mut links = [
        ImpairedLink::new(LinkConfig::lossy(drop_rate), seed),
        ImpairedLink::new(LinkConfig::lossy(drop_rate), seed.wrapping_add(0x9E37_79B9)),
    ];
    let mut bridge = Bridge::new(reg.clone(), 2);
    let mut seen = HashSet::new();
    let mut duplicates_out = 0;
    for i in 0..n {
        // the message body carries the send index so repeats are visible
        let msg = reg
            .build(
                "COMMAND_ACK",
                &[
                    ("command", (i % 65_536) as f64),
                    ("result", (i / 65_536) as f64),
                ],
            )
            .unwrap();
        let raw = tx.encode(&msg).unwrap();
        for (k, link) in links.iter_mut().enumerate() {
            link.send(&raw, i as u64);
            for (_, bytes) in link.poll(i as u64) {
                for f in bridge.ingest(k, &bytes) {
                    if !seen.insert(f.payload.clone()) {
                        duplicates_out += 1;
                    }
                }
            }
        }
    }
    RedundancyReport {
        sent: n,
        unique_delivered: seen.len(),
        duplicates_out,
        suppressed: bridge.stats().duplicates,
    }
}
