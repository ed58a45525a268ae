use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use hexaflight::control::{Command, SafetyAction};
use hexaflight::proto::{ChannelState, Decoder, Registry};
use hexaflight::runtime::gcs::{self, GCS_COMP, GCS_SYS};
use hexaflight::runtime::server::Server;
use hexaflight::runtime::{Scenario, ServeOptions, SessionLog, Simulation};

pub const FENCE_RADIUS_M: f64 = 200.0;
pub const FENCE_CEILING_M: f64 = 100.0;

/// First truth sample outside the fence and the first RTL failsafe.
pub fn geofence_reaction(log: &SessionLog) -> (Option<u64>, Option<u64>) {
    let breach = log
        .truth
        .iter()
        .find(|s| {
            let p = s.position_ned_m;
            p.xy().norm() > FENCE_RADIUS_M || -p.z > FENCE_CEILING_M
        })
        .map(|s| s.t_us);
    let rtl = log.first_failsafe(|a| matches!(a, SafetyAction::ReturnToLaunch(_)));
    (breach, rtl)
}

/// A scripted-free copy of `name` for driving over the live server.
pub fn live_scenario(name: &str, duration_s: f64) -> Scenario {
    let mut s = super::scenario(name);
    s.script.clear();
    s.gcs.enabled = false;
    s.duration_s = duration_s;
    s
}

pub fn bind(s: &Scenario, speed: Option<f64>) -> (Server, Simulation) {
    let sim = Simulation::new(s).unwrap();
    let mut opts = ServeOptions::new("127.0.0.1:0".parse().unwrap());
    opts.ws_addr = Some("127.0.0.1:0".parse().unwrap());
    opts.speed = speed;
    let server = Server::bind(
        &opts,
        sim.registry().clone(),
        Arc::new(AtomicBool::new(false)),
    )
    .unwrap();
    (server, sim)
}

/// Ground station on the raw stream port.
pub struct StreamClient {
    pub sock: TcpStream,
    pub tx: ChannelState,
    pub rx: Decoder,
    reg: Arc<Registry>,
}

impl StreamClient {
    pub fn connect(addr: SocketAddr, reg: Arc<Registry>) -> Self {
        let sock = TcpStream::connect(addr).unwrap();
        sock.set_read_timeout(Some(Duration::from_millis(50)))
            .unwrap();
        Self {
            sock,
            tx: ChannelState::new(reg.clone(), GCS_SYS, GCS_COMP),
            rx: Decoder::new(reg.clone()),
            reg,
        }
    }

    pub fn send(&mut self, cmd: &Command) {
        for m in gcs::command_messages(&self.reg, cmd).unwrap() {
            let raw = self.tx.encode(&m).unwrap();
            self.sock.write_all(&raw).unwrap();
        }
    }

    pub fn heartbeat(&mut self) {
        let raw = self.tx.encode(&gcs::gcs_heartbeat(&self.reg)).unwrap();
        let _ = self.sock.write_all(&raw);
    }

    /// Status texts received within `wait`.
    pub fn texts(&mut self, wait: Duration) -> Vec<String> {
        let end = Instant::now() + wait;
        let mut out = Vec::new();
        let mut buf = [0u8; 4096];
        while Instant::now() < end {
            match self.sock.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => {
                    for f in self.rx.feed(&buf[..n]) {
                        if let Ok(m) = f.message(&self.reg) {
                            if let Some(t) = gcs::statustext_string(&self.reg, &m) {
                                out.push(t);
                            }
                        }
                    }
                }
                Err(_) => {}
            }
        }
        out
    }
}

/// Arms and takes off to `alt` through the stream port while the server
/// paces the run at `speed`. Returns the log and what a late second client
/// heard back after trying to disarm.
pub fn served_takeoff(alt: f64, duration_s: f64, speed: f64) -> (SessionLog, Vec<String>) {
    let s = live_scenario("calm_hover", duration_s);
    let (server, sim) = bind(&s, Some(speed));
    let addr = server.stream_addr;
    let reg = sim.registry().clone();
    let run = thread::spawn(move || server.run(sim, Some(speed)).unwrap());

    let mut pilot = StreamClient::connect(addr, reg.clone());
    pilot.texts(Duration::from_millis(100));
    let mut watcher = StreamClient::connect(addr, reg);
    watcher.texts(Duration::from_millis(100));
    watcher.send(&Command::Disarm);
    let heard = watcher.texts(Duration::from_millis(300));

    pilot.send(&Command::Arm);
    pilot.heartbeat();
    thread::sleep(Duration::from_millis(100));
    pilot.send(&Command::Takeoff {
        altitude_m: Some(alt),
    });
    while !run.is_finished() {
        pilot.heartbeat();
        watcher.heartbeat();
        pilot.texts(Duration::from_millis(100));
        watcher.texts(Duration::from_millis(1));
    }
    (run.join().unwrap(), heard)
}

/// Wall seconds taken to serve `duration_s` of simulation at `speed`.
pub fn served_wall_time(duration_s: f64, speed: f64) -> f64 {
    let s = live_scenario("calm_hover", duration_s);
    let (server, sim) = bind(&s, Some(speed));
    let t0 = Instant::now();
    server.run(sim, Some(speed)).unwrap();
    t0.elapsed().as_secs_f64()
}
