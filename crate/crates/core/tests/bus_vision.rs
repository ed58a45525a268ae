mod common;

use std::net::SocketAddr;
use std::time::Duration;

use hexaflight::bus::{Bus, DatagramEndpoint, Envelope, ImageHub, ImageHubError, NodeKind};
use hexaflight::vision::ImageFrame;

#[test]
fn survivors_keep_talking_after_any_node_dies() {
    for r in common::bus::kill_each_kind() {
        assert!(r.survivors_ok, "{:?} killed: {}", r.killed, r.detail);
    }
}

#[test]
fn dropped_node_takes_its_subscriptions() {
    let bus = Bus::new();
    let a = bus.join("a", NodeKind::PubSub);
    let b = bus.join("b", NodeKind::Subscriber);
    let _sa = a.subscribe("x");
    let _sb = b.subscribe("x");
    assert_eq!(bus.subscriber_count("x"), 2);
    drop(b);
    assert_eq!(bus.subscriber_count("x"), 1);
    assert_eq!(a.publish("x", b"hi"), 1);
    assert_eq!(bus.inventory().len(), 1);
}

#[test]
fn concurrent_publishers_lose_nothing() {
    let bus = Bus::new();
    let sink = bus.join("sink", NodeKind::Subscriber);
    let sub = sink.subscribe_with_depth("load/*", 8 * 500);
    let workers: Vec<_> = (0..8)
        .map(|i| {
            let n = bus.join(&format!("p{i}"), NodeKind::Publisher);
            std::thread::spawn(move || {
                for k in 0..500u32 {
                    n.publish(&format!("load/{i}"), &k.to_le_bytes());
                }
            })
        })
        .collect();
    drop(bus);
    workers.into_iter().for_each(|w| w.join().unwrap());
    let got = sub.drain();
    assert_eq!(got.len(), 4000);
    assert_eq!(sub.overflowed(), 0);
    // per-publisher order survives
    for p in got
        .iter()
        .map(|e| e.publisher)
        .collect::<std::collections::BTreeSet<_>>()
    {
        let seqs: Vec<u64> = got
            .iter()
            .filter(|e| e.publisher == p)
            .map(|e| e.seq)
            .collect();
        assert!(seqs.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn datagram_peers_exchange_without_a_hub() {
    let any: SocketAddr = "127.0.0.1:0".parse().unwrap();
    let a = DatagramEndpoint::bind(any).unwrap();
    let b = DatagramEndpoint::bind(any).unwrap();
    let env = Envelope {
        topic: "sensors/gps".into(),
        publisher: 7,
        seq: 42,
        timestamp_us: 1_234_567,
        payload: vec![1, 2, 3, 250],
    };
    a.send_to(&env, b.local_addr().unwrap()).unwrap();
    let got = b.recv(Duration::from_secs(2)).unwrap().expect("datagram");
    assert_eq!(got, env);
    assert!(b.recv(Duration::from_millis(20)).unwrap().is_none());
}

#[test]
fn image_hub_readers_never_see_torn_frames() {
    let r = common::bus::image_hub_stress(8, 400);
    assert!(r.reads > 0);
    assert_eq!(r.torn, 0);
    assert_eq!(r.went_backwards, 0);
    assert!(r.last_seen.iter().all(|&s| s == 400), "{:?}", r.last_seen);
}

#[test]
fn image_hub_rejects_second_writer() {
    let hub = ImageHub::new();
    hub.put(3, 0, ImageFrame::blank(8, 8, 1)).unwrap();
    let err = hub.put(4, 0, ImageFrame::blank(8, 8, 2)).unwrap_err();
    assert!(matches!(
        err,
        ImageHubError::NotOwner {
            camera: 0,
            owner: 3
        }
    ));
    assert_eq!(hub.get_latest(0).unwrap().1, 1);
    assert!(hub.get_latest(1).is_none());
}

#[test]
fn noiseless_centroid_matches_projection() {
    let (worst, used) = common::vision::projection_agreement(200, 11);
    assert_eq!(used, 200);
    assert!(worst < 0.5, "worst {worst:.3} px");
}

#[test]
fn track_keeps_target_central_and_standoff() {
    let r = common::vision::track_metrics(4, 10.0);
    assert!(r.frames > 300, "{r:?}");
    assert!(r.central_ratio >= 0.9, "{r:?}");
    assert!(r.min_range_m >= 10.0, "{r:?}");
    assert_eq!(r.failsafes, 0, "{r:?}");
}
