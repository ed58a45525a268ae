//! Offline replay of telemetry logs.

use std::collections::BTreeMap;

use crate::control::FlightMode;
use crate::proto::{decode_frame, ids, Registry, TlogRecord};

use super::gcs;

/// What a log contains, decoded with a given dialect.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplaySummary {
    pub records: usize,
    pub first_us: Option<u64>,
    pub last_us: Option<u64>,
    /// Frame counts by message name.
    pub messages: BTreeMap<String, usize>,
    pub undecodable: usize,
    /// Vehicle mode changes seen in heartbeats, in order.
    pub modes: Vec<(u64, FlightMode)>,
    pub status_texts: Vec<(u64, String)>,
    /// Last reported local position, NED.
    pub last_position: Option<[f64; 3]>,
}

impl ReplaySummary {
    pub fn duration_s(&self) -> f64 {
        match (self.first_us, self.last_us) {
            (Some(a), Some(b)) => (b - a) as f64 * 1e-6,
            _ => 0.0,
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("{} records over {:.1} s\n", self.records, self.duration_s());
        for (name, n) in &self.messages {
            out.push_str(&format!("  {name:<16} {n}\n"));
        }
        if self.undecodable > 0 {
            out.push_str(&format!("  undecodable      {}\n", self.undecodable));
        }
        let t0 = self.first_us.unwrap_or(0);
        for (t, m) in &self.modes {
            out.push_str(&format!("{:>9.3} mode {m}\n", (t - t0) as f64 * 1e-6));
        }
        for (t, s) in &self.status_texts {
            out.push_str(&format!("{:>9.3} status {s}\n", (t - t0) as f64 * 1e-6));
        }
        if let Some(p) = self.last_position {
            out.push_str(&format!(
                "final position {:.2} {:.2} {:.2}\n",
                p[0], p[1], p[2]
            ));
        }
        out
    }
}

pub fn replay_tlog(records: &[TlogRecord], reg: &Registry) -> ReplaySummary {
    let mut s = ReplaySummary {
        records: records.len(),
        first_us: records.first().map(|r| r.timestamp_us),
        last_us: records.last().map(|r| r.timestamp_us),
        ..Default::default()
    };
    for r in records {
        let Ok(frame) = decode_frame(&r.frame, reg) else {
            s.undecodable += 1;
            continue;
        };
        let Ok(msg) = frame.message(reg) else {
            s.undecodable += 1;
            continue;
        };
        let name = reg
            .get(msg.msg_id)
            .map(|m| m.name.clone())
            .unwrap_or_default();
        *s.messages.entry(name).or_default() += 1;
        let from_vehicle = frame.sys_id == gcs::VEHICLE_SYS;
        match msg.msg_id {
            ids::HEARTBEAT if from_vehicle => {
                let mode = reg
                    .field(&msg, "custom_mode")
                    .and_then(|m| FlightMode::from_custom_mode(m as u32));
                if let Some(mode) = mode {
                    if s.modes.last().map(|(_, m)| *m) != Some(mode) {
                        s.modes.push((r.timestamp_us, mode));
                    }
                }
            }
            ids::STATUSTEXT => {
                if let Some(text) = gcs::statustext_string(reg, &msg) {
                    s.status_texts.push((r.timestamp_us, text));
                }
            }
            ids::LOCAL_POSITION => {
                let f = |n| reg.field(&msg, n).unwrap_or(f64::NAN);
                s.last_position = Some([f("x"), f("y"), f("z")]);
            }
            _ => {}
        }
    }
    s
}
