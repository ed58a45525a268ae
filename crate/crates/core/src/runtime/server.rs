//! Live serving: the simulation paced to wall clock, telemetry broadcast to
//! clients over a raw TCP stream and over WebSocket, one client at a time
//! holding control authority.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use tungstenite::{Message as WsMessage, WebSocket};

use crate::proto::{ChannelState, Decoder, Registry};

use super::gcs::{self, UPLINK_IDS};
use super::scenario::Scenario;
use super::sim::{SessionLog, Simulation};
use super::RuntimeError;

/// Component id of the server's own notices to a single client.
pub const SERVER_COMP: u8 = 2;
const POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone)]
pub struct ServeOptions {
    /// Raw framed byte stream.
    pub stream_addr: SocketAddr,
    /// WebSocket endpoint, binary messages carrying whole frames.
    pub ws_addr: Option<SocketAddr>,
    /// Simulated seconds per wall-clock second; `None` runs unpaced.
    pub speed: Option<f64>,
    /// Frames streamed to clients per second of video; 0 disables.
    pub vision_stream_hz: u32,
}

impl ServeOptions {
    pub fn new(stream_addr: SocketAddr) -> Self {
        Self {
            stream_addr,
            ws_addr: None,
            speed: Some(1.0),
            vision_stream_hz: 2,
        }
    }
}

type ClientId = u64;

enum Inbound {
    Uplink(Vec<u8>),
}

struct Client {
    tx: Sender<Vec<u8>>,
}

/// Connected clients and who holds control.
#[derive(Default)]
struct Clients {
    by_id: BTreeMap<ClientId, Client>,
    authority: Option<ClientId>,
}

struct Shared {
    reg: Arc<Registry>,
    clients: Mutex<Clients>,
    next_id: AtomicU64,
    stop: Arc<AtomicBool>,
    inbound: Mutex<Sender<Inbound>>,
    notices: Mutex<ChannelState>,
    /// Encoded tlog of the session so far, for download.
    tlog: Mutex<Vec<u8>>,
}

impl Shared {
    fn lock(&self) -> std::sync::MutexGuard<'_, Clients> {
        self.clients.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn join(&self) -> (ClientId, Receiver<Vec<u8>>) {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = mpsc::channel();
        let mut c = self.lock();
        c.by_id.insert(id, Client { tx });
        if c.authority.is_none() {
            c.authority = Some(id);
        }
        drop(c);
        let role = if self.has_authority(id) {
            "control"
        } else {
            "monitor"
        };
        self.notice(id, 6, &format!("connected as {role}"));
        (id, rx)
    }

    fn leave(&self, id: ClientId) {
        let mut c = self.lock();
        c.by_id.remove(&id);
        if c.authority == Some(id) {
            // control passes to the longest-connected remaining client
            c.authority = c.by_id.keys().next().copied();
            if let Some(next) = c.authority {
                drop(c);
                self.notice(next, 6, "control authority granted");
            }
        }
    }

    fn has_authority(&self, id: ClientId) -> bool {
        self.lock().authority == Some(id)
    }

    fn notice(&self, id: ClientId, severity: u8, text: &str) {
        let msg = gcs::statustext(&self.reg, severity, text);
        let raw = {
            let mut ch = self.notices.lock().unwrap_or_else(|e| e.into_inner());
            match ch.encode(&msg) {
                Ok(r) => r,
                Err(_) => return,
            }
        };
        if let Some(c) = self.lock().by_id.get(&id) {
            let _ = c.tx.send(raw);
        }
    }

    fn broadcast(&self, bytes: &[u8]) {
        for c in self.lock().by_id.values() {
            let _ = c.tx.send(bytes.to_vec());
        }
    }

    /// Screens decoded client bytes and forwards what the vehicle may see.
    fn accept_from(&self, id: ClientId, decoder: &mut Decoder, bytes: &[u8]) {
        for frame in decoder.feed(bytes) {
            if !UPLINK_IDS.contains(&frame.msg_id) {
                self.notice(
                    id,
                    4,
                    &format!("rejected: message id {} not accepted", frame.msg_id),
                );
                continue;
            }
            if gcs::needs_authority(frame.msg_id) && !self.has_authority(id) {
                self.notice(id, 4, "rejected: client has no control authority");
                continue;
            }
            if let Ok(raw) = crate::proto::encode_frame(&frame, &self.reg) {
                let _ = self
                    .inbound
                    .lock()
                    .unwrap_or_else(|e| e.into_inner())
                    .send(Inbound::Uplink(raw));
            }
        }
    }
}

fn spawn_stream_client(shared: Arc<Shared>, stream: TcpStream) {
    let (id, rx) = shared.join();
    let _ = stream.set_nodelay(true);
    let Ok(mut writer) = stream.try_clone() else {
        shared.leave(id);
        return;
    };
    let stop = shared.stop.clone();
    thread::spawn(move || {
        while let Ok(bytes) = rx.recv() {
            if stop.load(Ordering::Relaxed) || writer.write_all(&bytes).is_err() {
                break;
            }
        }
        let _ = writer.shutdown(std::net::Shutdown::Both);
    });
    thread::spawn(move || {
        let mut reader = stream;
        let mut decoder = Decoder::new(shared.reg.clone());
        let mut buf = [0u8; 4096];
        let _ = reader.set_read_timeout(Some(Duration::from_millis(200)));
        loop {
            if shared.stop.load(Ordering::Relaxed) {
                break;
            }
            match reader.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => shared.accept_from(id, &mut decoder, &buf[..n]),
                Err(e)
                    if matches!(
                        e.kind(),
                        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                    ) => {}
                Err(_) => break,
            }
        }
        shared.leave(id);
    });
}

/// Plain HTTP requests on the browser-socket port fetch the dialect or
/// the session log; everything else is a WebSocket upgrade.
fn http_get_path(stream: &TcpStream) -> Option<String> {
    let _ = stream.set_read_timeout(Some(Duration::from_secs(2)));
    let mut buf = [0u8; 2048];
    let deadline = Instant::now() + Duration::from_secs(2);
    loop {
        let n = stream.peek(&mut buf).ok()?;
        let head = String::from_utf8_lossy(&buf[..n]).to_ascii_lowercase();
        if head.contains("\r\n\r\n") || n == buf.len() || Instant::now() > deadline {
            if head.contains("upgrade: websocket") {
                return None;
            }
            return head.split_whitespace().nth(1).map(str::to_string);
        }
        thread::sleep(Duration::from_millis(5));
    }
}

fn respond_http(shared: &Shared, mut stream: TcpStream, path: &str) {
    let mut drain = [0u8; 2048];
    let _ = stream.read(&mut drain);
    let (status, ctype, body) = match path {
        "/dialect.xml" => (
            "200 OK",
            "application/xml",
            crate::proto::CORE_DIALECT.as_bytes().to_vec(),
        ),
        "/session.tlog" => (
            "200 OK",
            "application/octet-stream",
            shared
                .tlog
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .clone(),
        ),
        _ => ("404 Not Found", "text/plain", b"not found\n".to_vec()),
    };
    let header = format!(
        "HTTP/1.1 {status}\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nAccess-Control-Allow-Origin: *\r\nConnection: close\r\n\r\n",
        body.len()
    );
    let _ = stream.write_all(header.as_bytes());
    let _ = stream.write_all(&body);
}

fn spawn_ws_client(shared: Arc<Shared>, stream: TcpStream) {
    thread::spawn(move || {
        let _ = stream.set_nodelay(true);
        if let Some(path) = http_get_path(&stream) {
            respond_http(&shared, stream, &path);
            return;
        }
        let Ok(mut ws) = tungstenite::accept(stream) else {
            return;
        };
        let _ = ws.get_ref().set_read_timeout(Some(POLL));
        let (id, rx) = shared.join();
        let mut decoder = Decoder::new(shared.reg.clone());
        run_ws(&shared, id, &mut ws, &rx, &mut decoder);
        let _ = ws.close(None);
        let _ = ws.flush();
        shared.leave(id);
    });
}

fn run_ws(
    shared: &Shared,
    id: ClientId,
    ws: &mut WebSocket<TcpStream>,
    rx: &Receiver<Vec<u8>>,
    decoder: &mut Decoder,
) {
    loop {
        if shared.stop.load(Ordering::Relaxed) {
            return;
        }
        loop {
            match rx.try_recv() {
                Ok(bytes) => {
                    if ws.send(WsMessage::Binary(bytes)).is_err() {
                        return;
                    }
                }
                Err(mpsc::TryRecvError::Empty) => break,
                Err(mpsc::TryRecvError::Disconnected) => return,
            }
        }
        match ws.read() {
            Ok(WsMessage::Binary(bytes)) => shared.accept_from(id, decoder, &bytes),
            Ok(WsMessage::Close(_)) => return,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) => {}
            Err(_) => return,
        }
    }
}

fn spawn_acceptor(listener: TcpListener, shared: Arc<Shared>, ws: bool) -> io::Result<()> {
    listener.set_nonblocking(true)?;
    thread::spawn(move || loop {
        if shared.stop.load(Ordering::Relaxed) {
            return;
        }
        match listener.accept() {
            Ok((stream, _)) => {
                let _ = stream.set_nonblocking(false);
                if ws {
                    spawn_ws_client(shared.clone(), stream);
                } else {
                    spawn_stream_client(shared.clone(), stream);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(_) => return,
        }
    });
    Ok(())
}

/// Bound listeners, ready to run.
pub struct Server {
    shared: Arc<Shared>,
    inbound: Receiver<Inbound>,
    pub stream_addr: SocketAddr,
    pub ws_addr: Option<SocketAddr>,
}

impl Server {
    pub fn bind(
        opts: &ServeOptions,
        reg: Arc<Registry>,
        stop: Arc<AtomicBool>,
    ) -> Result<Self, RuntimeError> {
        let (tx, inbound) = mpsc::channel();
        let shared = Arc::new(Shared {
            notices: Mutex::new(ChannelState::new(
                reg.clone(),
                gcs::VEHICLE_SYS,
                SERVER_COMP,
            )),
            reg,
            clients: Mutex::new(Clients::default()),
            next_id: AtomicU64::new(1),
            stop,
            inbound: Mutex::new(tx),
            tlog: Mutex::new(Vec::new()),
        });
        let stream = TcpListener::bind(opts.stream_addr)?;
        let stream_addr = stream.local_addr()?;
        spawn_acceptor(stream, shared.clone(), false)?;
        let ws_addr = match opts.ws_addr {
            Some(addr) => {
                let l = TcpListener::bind(addr)?;
                let a = l.local_addr()?;
                spawn_acceptor(l, shared.clone(), true)?;
                Some(a)
            }
            None => None,
        };
        Ok(Self {
            shared,
            inbound,
            stream_addr,
            ws_addr,
        })
    }

    pub fn client_count(&self) -> usize {
        self.shared.lock().by_id.len()
    }

    /// Runs the simulation to its end or until `stop` is raised.
    pub fn run(self, mut sim: Simulation, speed: Option<f64>) -> Result<SessionLog, RuntimeError> {
        sim.set_collect_downlink(true);
        let duration = sim.scenario().duration_s;
        let start = Instant::now();
        let sim_start = sim.time_s();
        let mut logged = 0;
        while sim.time_s() < duration && !self.shared.stop.load(Ordering::Relaxed) {
            while let Ok(Inbound::Uplink(bytes)) = self.inbound.try_recv() {
                sim.inject_uplink(&bytes);
            }
            let chunk = POLL.as_secs_f64().min(duration - sim.time_s());
            sim.run_for(chunk)?;
            for (_, bytes) in sim.drain_downlink() {
                self.shared.broadcast(&bytes);
            }
            let records = &sim.log().tlog[logged..];
            if !records.is_empty() {
                let mut out = self.shared.tlog.lock().unwrap_or_else(|e| e.into_inner());
                for r in records {
                    out.extend_from_slice(&r.timestamp_us.to_be_bytes());
                    out.extend_from_slice(&r.frame);
                }
                logged += records.len();
            }
            if let Some(speed) = speed.filter(|s| *s > 0.0) {
                let due = Duration::from_secs_f64((sim.time_s() - sim_start) / speed);
                if let Some(wait) = due.checked_sub(start.elapsed()) {
                    thread::sleep(wait);
                }
            }
        }
        self.shared.stop.store(true, Ordering::Relaxed);
        self.shared.lock().by_id.clear();
        Ok(sim.finish())
    }
}

/// Binds, runs and returns the session log.
pub fn serve(
    scenario: &Scenario,
    opts: &ServeOptions,
    stop: Arc<AtomicBool>,
) -> Result<SessionLog, RuntimeError> {
    let mut scenario = scenario.clone();
    scenario.rates.vision_stream_hz = opts.vision_stream_hz;
    let sim = Simulation::new(&scenario)?;
    let server = Server::bind(opts, sim.registry().clone(), stop)?;
    eprintln!("serving stream on {}", server.stream_addr);
    if let Some(ws) = server.ws_addr {
        eprintln!("serving websocket on ws://{ws}");
    }
    server.run(sim, opts.speed)
}
