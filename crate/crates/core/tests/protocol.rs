mod common;

use common::proto::{
    crc_check_value, crc_oracle, drop_detection, protocol_overhead, random_message, redundant_links,
};
use hexaflight::proto::{
    core_registry, crc16, load_schema, parse_schema, tlog_read, tlog_write, ChannelState, Decoder,
    TlogRecord, TlogWriter, CORE_DIALECT,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn overhead_is_eight_bytes_for_every_type() {
    let r = protocol_overhead(10_000, 1);
    assert_eq!(r.messages, 10_000);
    assert_eq!(r.types_covered, core_registry().len());
    assert_eq!(r.wrong_overhead, 0);
    assert_eq!(r.roundtrip_failures, 0);
    assert_eq!(r.crc_mismatches, 0);
}

#[test]
fn crc_check_value_and_oracle() {
    assert_eq!(crc_check_value(), 0x6F91);
    assert_eq!(crc_oracle(b"123456789"), 0x6F91);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for len in 0..300 {
        let bytes: Vec<u8> = (0..len).map(|_| rand::Rng::gen(&mut rng)).collect();
        assert_eq!(crc16(&bytes), crc_oracle(&bytes));
    }
}

#[test]
fn shipped_dialect_seeds_are_stable() {
    let reg = core_registry();
    let seeds: Vec<(u8, u8)> = reg.schemas().map(|s| (s.msg_id, s.crc_extra)).collect();
    // message signature CRCs, frozen so that other codecs can check against them
    let reparsed = parse_schema(CORE_DIALECT).unwrap();
    let again: Vec<(u8, u8)> = reparsed
        .schemas()
        .map(|s| (s.msg_id, s.crc_extra))
        .collect();
    assert_eq!(seeds, again);
    let sig = |name: &str, fields: &[(&str, &str)]| {
        let mut t = format!("{name} ");
        for (ty, f) in fields {
            t.push_str(&format!("{ty} {f} "));
        }
        let c = crc_oracle(t.as_bytes());
        ((c >> 8) as u8) ^ (c as u8)
    };
    let set_mode = reg.by_name("SET_MODE").unwrap();
    assert_eq!(
        set_mode.crc_extra,
        sig(
            "SET_MODE",
            &[
                ("u32", "custom_mode"),
                ("u8", "target_system"),
                ("u8", "base_mode")
            ]
        )
    );
}

#[test]
fn decoder_resyncs_after_garbage() {
    let reg = core_registry();
    let mut tx = ChannelState::new(reg.clone(), 1, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let schemas: Vec<_> = reg.schemas().cloned().collect();
    let mut stream = Vec::new();
    let mut sent = 0;
    for i in 0..500 {
        let msg = random_message(&schemas[i % schemas.len()], &mut rng);
        let mut raw = tx.encode(&msg).unwrap();
        match i % 7 {
            0 => stream.extend_from_slice(&[0xFE, 0x03, 0xFE, 0x00, 0x42]),
            3 => {
                // corrupt: bad checksum, the frame is lost
                let n = raw.len();
                raw[n - 1] ^= 0x55;
                stream.extend(&raw);
                continue;
            }
            _ => {}
        }
        stream.extend(&raw);
        sent += 1;
    }
    let mut rx = Decoder::new(reg);
    let mut got = 0;
    for chunk in stream.chunks(37) {
        got += rx.feed(chunk).len();
    }
    assert_eq!(got, sent);
    assert!(rx.stats().frames_bad_crc > 0);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn any_chunking_decodes_the_same(seed in any::<u64>(), cuts in prop::collection::vec(1usize..64, 1..40)) {
        let reg = core_registry();
        let mut tx = ChannelState::new(reg.clone(), 7, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let schemas: Vec<_> = reg.schemas().cloned().collect();
        let mut stream = Vec::new();
        for i in 0..40 {
            stream.extend(tx.encode(&random_message(&schemas[i % schemas.len()], &mut rng)).unwrap());
        }
        let mut rx = Decoder::new(reg);
        let mut frames = Vec::new();
        let mut pos = 0;
        for c in cuts.iter().cycle() {
            if pos >= stream.len() {
                break;
            }
            let end = (pos + c).min(stream.len());
            frames.extend(rx.feed(&stream[pos..end]));
            pos = end;
        }
        prop_assert_eq!(frames.len(), 40);
        prop_assert_eq!(rx.stats().frames_dropped, 0);
        prop_assert!(frames.iter().enumerate().all(|(i, f)| f.seq == i as u8));
    }
}

#[test]
fn drop_detection_counts_every_loss() {
    for seed in [1, 2, 3] {
        let r = drop_detection(100_000, 0.05, seed);
        assert_eq!(r.reported, r.injected, "seed {seed}");
        assert!(
            (r.fraction - 0.05).abs() < 0.005,
            "seed {seed}: {}",
            r.fraction
        );
    }
}

#[test]
fn redundant_links_deliver_without_duplicates() {
    let r = redundant_links(10_000, 0.30, 5);
    assert!(r.unique_delivered as f64 / r.sent as f64 >= 0.89, "{r:?}");
    assert_eq!(r.duplicates_out, 0);
    assert!(r.suppressed > 0);
}

#[test]
fn tlog_round_trip_and_ordering() {
    let reg = core_registry();
    let mut tx = ChannelState::new(reg.clone(), 1, 1);
    let hb = reg.build("HEARTBEAT", &[]).unwrap();
    let records: Vec<TlogRecord> = (0..50)
        .map(|i| TlogRecord {
            timestamp_us: 1_000_000 + i * 100_000,
            frame: tx.encode(&hb).unwrap(),
        })
        .collect();
    let bytes = tlog_write(&records).unwrap();
    assert_eq!(&bytes[..8], &1_000_000u64.to_be_bytes());
    assert_eq!(tlog_read(&bytes).unwrap(), records);

    let mut w = TlogWriter::new(Vec::new());
    w.write(10, &records[0].frame).unwrap();
    assert!(w.write(9, &records[1].frame).is_err());
    // a record cut short by a crash is dropped, the rest survive
    assert_eq!(tlog_read(&bytes[..bytes.len() - 3]).unwrap().len(), 49);
    let mut bad = bytes.clone();
    bad[8] = 0x00;
    assert!(tlog_read(&bad).is_err());
}

#[test]
fn dialect_errors_are_reported() {
    assert!(parse_schema("<dialect name='x'><message id='1' name='A'><field type='u9' name='f'/></message></dialect>")
        .is_err());
    let dup = "<dialect name='x'><message id='1' name='A'><field type='u8' name='f'/></message>\
               <message id='1' name='B'><field type='u8' name='g'/></message></dialect>";
    assert!(parse_schema(dup).is_err());
    assert!(load_schema("/nonexistent/dialect.xml").is_err());
    let shipped = load_schema(common::fixture("core_dialect.xml")).unwrap();
    assert_eq!(shipped, *core_registry());
}
