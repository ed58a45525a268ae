//! Brokerless publish/subscribe.
//!
//! Every publisher writes straight into the bounded queue of each matching
//! subscriber on its own thread. The [`Bus`] value is only the shared
//! membership table; it runs no thread and forwards nothing itself.

pub mod bridge;
pub mod datagram;
pub mod image_hub;
pub mod link;

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock, Weak};
use std::time::Duration;

pub use bridge::{Bridge, BridgeStats, DedupWindow, DEDUP_WINDOW};
pub use datagram::{decode_envelope, encode_envelope, DatagramEndpoint};
pub use image_hub::{ImageHub, ImageHubError};
pub use link::{ImpairedLink, LinkConfig, LinkKind, LinkStats as ImpairmentStats};

pub type NodeId = u32;

/// Default per-subscriber queue depth.
pub const DEFAULT_QUEUE_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub topic: String,
    pub publisher: NodeId,
    pub seq: u64,
    pub timestamp_us: u64,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Publisher,
    Subscriber,
    PubSub,
    Bridge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeInfo {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Default)]
struct QueueState {
    items: VecDeque<Envelope>,
    overflowed: u64,
    delivered: u64,
}

#[derive(Debug)]
struct SubQueue {
    depth: usize,
    state: Mutex<QueueState>,
    ready: Condvar,
}

impl SubQueue {
    fn push(&self, env: Envelope) {
        let mut s = self.state.lock().unwrap_or_else(|e| e.into_inner());
        if s.items.len() >= self.depth {
            s.items.pop_front();
            s.overflowed += 1;
        }
        s.items.push_back(env);
        s.delivered += 1;
        drop(s);
        self.ready.notify_one();
    }
}

#[derive(Debug)]
struct SubEntry {
    node: NodeId,
    topic: String,
    queue: Weak<SubQueue>,
}

fn topic_matches(pattern: &str, topic: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(prefix) => topic.starts_with(prefix),
        None => pattern == topic,
    }
}

#[derive(Debug, Default)]
struct BusInner {
    subs: RwLock<Vec<SubEntry>>,
    nodes: Mutex<HashMap<NodeId, NodeInfo>>,
    next_id: AtomicU32,
}

/// Shared membership table. Cloning is cheap.
#[derive(Debug, Clone, Default)]
pub struct Bus {
    inner: Arc<BusInner>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn join(&self, name: &str, kind: NodeKind) -> Node {
        let id = self.inner.next_id.fetch_add(1, Ordering::Relaxed) + 1;
        self.inner
            .nodes
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(
                id,
                NodeInfo {
                    id,
                    name: name.to_string(),
                    kind,
                },
            );
        Node {
            bus: self.clone(),
            id,
            seqs: Mutex::new(HashMap::new()),
            clock: AtomicU64::new(0),
        }
    }

    /// Nodes currently joined.
    pub fn inventory(&self) -> Vec<NodeInfo> {
        let mut v: Vec<_> = self
            .inner
            .nodes
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect();
        v.sort_by_key(|n| n.id);
        v
    }

    pub fn subscriber_count(&self, topic: &str) -> usize {
        self.inner
            .subs
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .iter()
            .filter(|s| topic_matches(&s.topic, topic) && s.queue.strong_count() > 0)
            .count()
    }

    fn leave(&self, id: NodeId) {
        self.inner
            .nodes
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .remove(&id);
        self.inner
            .subs
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .retain(|s| s.node != id);
    }

    fn deliver(&self, env: &Envelope) -> usize {
        let mut n = 0;
        let mut stale = false;
        {
            let subs = self.inner.subs.read().unwrap_or_else(|e| e.into_inner());
            for s in subs.iter().filter(|s| topic_matches(&s.topic, &env.topic)) {
                match s.queue.upgrade() {
                    Some(q) => {
                        q.push(env.clone());
                        n += 1;
                    }
                    None => stale = true,
                }
            }
        }
        if stale {
            self.inner
                .subs
                .write()
                .unwrap_or_else(|e| e.into_inner())
                .retain(|s| s.queue.strong_count() > 0);
        }
        n
    }
}

/// A participant on the bus. Dropping it leaves the bus and cancels its
/// subscriptions.
#[derive(Debug)]
pub struct Node {
    bus: Bus,
    id: NodeId,
    seqs: Mutex<HashMap<String, u64>>,
    clock: AtomicU64,
}

impl Node {
    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    /// Sets the timestamp stamped on subsequent envelopes.
    pub fn set_time_us(&self, t: u64) {
        self.clock.store(t, Ordering::Relaxed);
    }

    /// Publishes to every current subscriber; returns how many received it.
    pub fn publish(&self, topic: &str, payload: &[u8]) -> usize {
        let seq = {
            let mut seqs = self.seqs.lock().unwrap_or_else(|e| e.into_inner());
            let s = seqs.entry(topic.to_string()).or_insert(0);
            *s += 1;
            *s
        };
        self.bus.deliver(&Envelope {
            topic: topic.to_string(),
            publisher: self.id,
            seq,
            timestamp_us: self.clock.load(Ordering::Relaxed),
            payload: payload.to_vec(),
        })
    }

    /// Re-publishes an envelope received from elsewhere, keeping its
    /// publisher and sequence.
    pub fn forward(&self, env: &Envelope) -> usize {
        self.bus.deliver(env)
    }

    /// Subscribes to `topic`; a trailing `*` matches any suffix.
    pub fn subscribe(&self, topic: &str) -> Subscription {
        self.subscribe_with_depth(topic, DEFAULT_QUEUE_DEPTH)
    }

    pub fn subscribe_with_depth(&self, topic: &str, depth: usize) -> Subscription {
        let queue = Arc::new(SubQueue {
            depth: depth.max(1),
            state: Mutex::new(QueueState::default()),
            ready: Condvar::new(),
        });
        self.bus
            .inner
            .subs
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .push(SubEntry {
                node: self.id,
                topic: topic.to_string(),
                queue: Arc::downgrade(&queue),
            });
        Subscription {
            topic: topic.to_string(),
            queue,
        }
    }
}

impl Drop for Node {
    fn drop(&mut self) {
        self.bus.leave(self.id);
    }
}

/// Receiving end of a subscription. Overflow drops the oldest envelope and
/// is counted here, never reported to the publisher.
#[derive(Debug)]
pub struct Subscription {
    topic: String,
    queue: Arc<SubQueue>,
}

impl Subscription {
    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn try_recv(&self) -> Option<Envelope> {
        self.queue
            .state
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .items
            .pop_front()
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<Envelope> {
        let guard = self.queue.state.lock().unwrap_or_else(|e| e.into_inner());
        let (mut s, _) = self
            .queue
            .ready
            .wait_timeout_while(guard, timeout, |s| s.items.is_empty())
            .unwrap_or_else(|e| e.into_inner());
        s.items.pop_front()
    }

    pub fn drain(&self) -> Vec<Envelope> {
        self.queue
            .state
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .items
            .drain(..)
            .collect()
    }

    pub fn overflowed(&self) -> u64 {
        self.queue
            .state
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .overflowed
    }

    pub fn delivered(&self) -> u64 {
        self.queue
            .state
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .delivered
    }
}
