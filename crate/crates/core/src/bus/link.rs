//! Seeded link impairments: loss, latency, jitter and bandwidth.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    #[default]
    InProcess,
    Datagram,
    Stream,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct LinkConfig {
    pub kind: LinkKind,
    pub drop_rate: f64,
    pub latency_ms: f64,
    pub jitter_ms: f64,
    /// Bits per second; `None` is unlimited.
    pub bandwidth_bps: Option<f64>,
}

impl LinkConfig {
    pub fn lossy(drop_rate: f64) -> Self {
        Self {
            drop_rate,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.drop_rate) {
            return Err(format!("drop_rate {} outside [0, 1]", self.drop_rate));
        }
        if !(self.latency_ms >= 0.0 && self.jitter_ms >= 0.0) {
            return Err("latency and jitter must be non-negative".into());
        }
        if let Some(bw) = self.bandwidth_bps {
            if !(bw > 0.0) {
                return Err("bandwidth must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkStats {
    pub sent: u64,
    pub dropped: u64,
    pub delivered: u64,
}

/// One-directional impaired link. Delivery order always matches send
/// order; jitter only stretches gaps.
#[derive(Debug, Clone)]
pub struct ImpairedLink {
    config: LinkConfig,
    rng: ChaCha8Rng,
    in_flight: VecDeque<(u64, Vec<u8>)>,
    last_delivery_us: u64,
    wire_free_us: u64,
    stats: LinkStats,
}

impl ImpairedLink {
    pub fn new(config: LinkConfig, seed: u64) -> Self {
        Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            in_flight: VecDeque::new(),
            last_delivery_us: 0,
            wire_free_us: 0,
            stats: LinkStats::default(),
        }
    }

    pub fn configure(&mut self, config: LinkConfig) {
        self.config = config;
    }

    pub fn config(&self) -> &LinkConfig {
        &self.config
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    /// Queues `bytes` sent at `now_us`. Returns false if the link drops it.
    pub fn send(&mut self, bytes: &[u8], now_us: u64) -> bool {
        self.stats.sent += 1;
        // always draw both so loss and delay streams stay aligned under a seed
        let u: f64 = self.rng.gen();
        let j: f64 = self.rng.gen();
        if u < self.config.drop_rate {
            self.stats.dropped += 1;
            return false;
        }
        let mut depart = now_us;
        if let Some(bw) = self.config.bandwidth_bps {
            depart = depart.max(self.wire_free_us);
            let tx_us = (bytes.len() as f64 * 8.0 / bw * 1e6).ceil() as u64;
            self.wire_free_us = depart + tx_us;
            depart = self.wire_free_us;
        }
        let delay_us =
            ((self.config.latency_ms + self.config.jitter_ms * j) * 1000.0).round() as u64;
        let due = (depart + delay_us).max(self.last_delivery_us);
        self.last_delivery_us = due;
        self.in_flight.push_back((due, bytes.to_vec()));
        true
    }

    /// Everything due at or before `now_us`, with its delivery time.
    pub fn poll(&mut self, now_us: u64) -> Vec<(u64, Vec<u8>)> {
        let mut out = Vec::new();
        while self
            .in_flight
            .front()
            .is_some_and(|(due, _)| *due <= now_us)
        {
            out.push(self.in_flight.pop_front().unwrap());
        }
        self.stats.delivered += out.len() as u64;
        out
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_by_default() {
        let mut l = ImpairedLink::new(LinkConfig::default(), 1);
        for i in 0..1000u64 {
            assert!(l.send(&[i as u8], i));
        }
        assert_eq!(l.poll(u64::MAX).len(), 1000);
    }

    #[test]
    fn latency_is_a_lower_bound() {
        let cfg = LinkConfig {
            latency_ms: 50.0,
            jitter_ms: 20.0,
            ..Default::default()
        };
        let mut l = ImpairedLink::new(cfg, 9);
        for i in 0..500u64 {
            l.send(&i.to_le_bytes(), i * 1000);
        }
        for (due, bytes) in l.poll(u64::MAX) {
            let sent = u64::from_le_bytes(bytes.try_into().unwrap()) * 1000;
            assert!(due >= sent + 50_000);
        }
    }

    #[test]
    fn seeded_loss_is_reproducible() {
        let run = |seed| {
            let mut l = ImpairedLink::new(LinkConfig::lossy(0.3), seed);
            (0..1000).map(|i| l.send(&[0], i)).collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn validation() {
        assert!(LinkConfig::lossy(1.5).validate().is_err());
        assert!(LinkConfig::lossy(0.05).validate().is_ok());
    }

    #[test]
    fn bandwidth_serializes() {
        let cfg = LinkConfig {
            bandwidth_bps: Some(8000.0),
            ..Default::default()
        };
        let mut l = ImpairedLink::new(cfg, 0);
        l.send(&[0; 100], 0);
        l.send(&[0; 100], 0);
        let out = l.poll(u64::MAX);
        assert_eq!(out[0].0, 100_000);
        assert_eq!(out[1].0, 200_000);
    }
}
