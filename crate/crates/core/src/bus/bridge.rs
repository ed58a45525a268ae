//! Forwards protocol frames between redundant links and the local bus.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use crate::proto::{encode_frame, Decoder, Frame, Registry};

use super::{Node, Subscription};

/// Sequence numbers remembered per sender for duplicate suppression.
pub const DEDUP_WINDOW: usize = 64;

pub const RX_TOPIC: &str = "mavlink/rx";
pub const TX_TOPIC: &str = "mavlink/tx";

#[derive(Debug, Clone)]
struct SeqWindow {
    order: VecDeque<u8>,
    seen: [bool; 256],
}

impl Default for SeqWindow {
    fn default() -> Self {
        Self {
            order: VecDeque::with_capacity(DEDUP_WINDOW),
            seen: [false; 256],
        }
    }
}

/// Remembers the last `DEDUP_WINDOW` sequence numbers per (sys, comp).
#[derive(Debug, Clone, Default)]
pub struct DedupWindow {
    senders: HashMap<(u8, u8), SeqWindow>,
}

impl DedupWindow {
    /// True if the frame is new and should be forwarded.
    pub fn admit(&mut self, frame: &Frame) -> bool {
        let w = self
            .senders
            .entry((frame.sys_id, frame.comp_id))
            .or_default();
        if w.seen[frame.seq as usize] {
            return false;
        }
        if w.order.len() == DEDUP_WINDOW {
            let old = w.order.pop_front().unwrap();
            w.seen[old as usize] = false;
        }
        w.order.push_back(frame.seq);
        w.seen[frame.seq as usize] = true;
        true
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BridgeStats {
    pub forwarded: u64,
    pub duplicates: u64,
    pub malformed: u64,
}

#[derive(Debug)]
pub struct Bridge {
    registry: Arc<Registry>,
    decoders: Vec<Decoder>,
    dedup: DedupWindow,
    stats: BridgeStats,
}

impl Bridge {
    pub fn new(registry: Arc<Registry>, links: usize) -> Self {
        assert!(links >= 1, "bridge needs at least one link");
        Self {
            decoders: (0..links).map(|_| Decoder::new(registry.clone())).collect(),
            registry,
            dedup: DedupWindow::default(),
            stats: BridgeStats::default(),
        }
    }

    pub fn links(&self) -> usize {
        self.decoders.len()
    }

    pub fn stats(&self) -> BridgeStats {
        let malformed = self.decoders.iter().map(|d| d.stats().frames_bad_crc).sum();
        BridgeStats {
            malformed,
            ..self.stats
        }
    }

    /// Decoder statistics for one link.
    pub fn link_stats(&self, link: usize) -> crate::proto::LinkStats {
        self.decoders[link].stats()
    }

    /// Feeds bytes received on `link`; returns frames not seen before.
    pub fn ingest(&mut self, link: usize, bytes: &[u8]) -> Vec<Frame> {
        let frames = self.decoders[link].feed(bytes);
        let mut out = Vec::with_capacity(frames.len());
        for f in frames {
            if self.dedup.admit(&f) {
                self.stats.forwarded += 1;
                out.push(f);
            } else {
                self.stats.duplicates += 1;
            }
        }
        out
    }

    /// Ingests and publishes unique frames on the bus as raw frame bytes.
    pub fn ingest_to_bus(&mut self, link: usize, bytes: &[u8], node: &Node) -> usize {
        let frames = self.ingest(link, bytes);
        for f in &frames {
            if let Ok(raw) = encode_frame(f, &self.registry) {
                node.publish(RX_TOPIC, &raw);
            }
        }
        frames.len()
    }

    /// Raw frames queued on the bus for transmission over every link.
    pub fn outbound(sub: &Subscription) -> Vec<Vec<u8>> {
        sub.drain().into_iter().map(|e| e.payload).collect()
    }
}
