use std::sync::Arc;
use std::thread;

use hexaflight::bus::{Bus, ImageHub, NodeKind, Subscription};
use hexaflight::vision::ImageFrame;

struct Role {
    name: &'static str,
    kind: NodeKind,
    subscribes: &'static [&'static str],
    publishes: Option<&'static str>,
}

const ROLES: [Role; 4] = [
    Role {
        name: "gps",
        kind: NodeKind::Publisher,
        subscribes: &[],
        publishes: Some("sensors/gps"),
    },
    Role {
        name: "logger",
        kind: NodeKind::Subscriber,
        subscribes: &["sensors/*", "control/*", "mavlink/*"],
        publishes: None,
    },
    Role {
        name: "controller",
        kind: NodeKind::PubSub,
        subscribes: &["sensors/*"],
        publishes: Some("control/out"),
    },
    Role {
        name: "radio",
        kind: NodeKind::Bridge,
        subscribes: &["control/*"],
        publishes: Some("mavlink/rx"),
    },
];

fn matches(pattern: &str, topic: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(p) => topic.starts_with(p),
        None => pattern == topic,
    }
}

#[derive(Debug)]
pub struct KillResult {
    pub killed: NodeKind,
    pub survivors_ok: bool,
    pub detail: String,
}

/// Joins one node of every kind, kills `victim`, drops the shared bus
/// handle and lets the survivors publish from their own threads.
pub fn kill_one(victim: NodeKind, per_publisher: usize) -> KillResult {
    let bus = Bus::new();
    let mut nodes = Vec::new();
    let mut subs: Vec<(usize, &str, Subscription)> = Vec::new();
    for (i, r) in ROLES.iter().enumerate() {
        let node = bus.join(r.name, r.kind);
        for p in r.subscribes {
            subs.push((i, p, node.subscribe(p)));
        }
        nodes.push(Some(node));
    }
    let vi = ROLES.iter().position(|r| r.kind == victim).unwrap();
    nodes[vi] = None;
    subs.retain(|(i, _, _)| *i != vi);
    let inventory = bus.inventory();
    drop(bus);

    let mut problems = Vec::new();
    if inventory.len() != ROLES.len() - 1 || inventory.iter().any(|n| n.kind == victim) {
        problems.push(format!("inventory {inventory:?}"));
    }

    let handles: Vec<_> = nodes
        .into_iter()
        .enumerate()
        .filter_map(|(i, n)| n.map(|n| (i, n)))
        .map(|(i, node)| {
            let topic = ROLES[i].publishes;
            thread::spawn(move || {
                if let Some(t) = topic {
                    for k in 0..per_publisher {
                        node.publish(t, &(k as u32).to_le_bytes());
                    }
                }
                node
            })
        })
        .collect();
    let survivors: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();

    for (i, pattern, sub) in &subs {
        let expected: usize = ROLES
            .iter()
            .enumerate()
            .filter(|(j, r)| *j != vi && r.publishes.is_some_and(|t| matches(pattern, t)))
            .count()
            * per_publisher;
        let got = sub.drain().len();
        if got != expected {
            problems.push(format!(
                "{} on {pattern}: {got} of {expected}",
                ROLES[*i].name
            ));
        }
    }
    drop(survivors);
    KillResult {
        killed: victim,
        survivors_ok: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("{} subscriptions intact", subs.len())
        } else {
            problems.join("; ")
        },
    }
}

pub fn kill_each_kind() -> Vec<KillResult> {
    [
        NodeKind::Publisher,
        NodeKind::Subscriber,
        NodeKind::PubSub,
        NodeKind::Bridge,
    ]
    .into_iter()
    .map(|k| kill_one(k, 100))
    .collect()
}

#[derive(Debug, Default)]
pub struct HubReport {
    pub reads: u64,
    pub torn: u64,
    pub went_backwards: u64,
    pub last_seen: Vec<u64>,
}

/// One writer and `readers` threads hammering a camera slot.
pub fn image_hub_stress(readers: usize, frames: u64) -> HubReport {
    let hub = Arc::new(ImageHub::new());
    let stop = Arc::new(std::sync::atomic::AtomicBool::new(false));
    let reader_handles: Vec<_> = (0..readers)
        .map(|_| {
            let hub = hub.clone();
            let stop = stop.clone();
            thread::spawn(move || {
                let (mut reads, mut torn, mut back, mut last) = (0u64, 0u64, 0u64, 0u64);
                loop {
                    let done = stop.load(std::sync::atomic::Ordering::Acquire);
                    if let Some((f, seq)) = hub.get_latest(0) {
                        reads += 1;
                        if !f.0.is_consistent() || f.0.frame_seq != seq {
                            torn += 1;
                        }
                        if seq < last {
                            back += 1;
                        }
                        last = seq;
                    }
                    if done {
                        break;
                    }
                }
                (reads, torn, back, last)
            })
        })
        .collect();
    for seq in 1..=frames {
        let pixels: Vec<u8> = (0..64 * 48)
            .map(|i| ((i as u64 * 31 + seq * 7) % 251) as u8)
            .collect();
        hub.put(1, 0, ImageFrame::new(64, 48, pixels, seq, seq * 33_333))
            .unwrap();
        thread::sleep(std::time::Duration::from_micros(100));
    }
    stop.store(true, std::sync::atomic::Ordering::Release);
    let mut r = HubReport::default();
    for h in reader_handles {
        let (reads, torn, back, last) = h.join().unwrap();
        r.reads += reads;
        r.torn += torn;
        r.went_backwards += back;
        r.last_seen.push(last);
    }
    r
}
