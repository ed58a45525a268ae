use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use hexaflight::atmos::SizingConfig;
use hexaflight::proto::{core_registry, load_schema, tlog_read_file};
use hexaflight::runtime::{replay_tlog, run_scenario, serve, Scenario, ServeOptions};

/// Hexacopter flight stack simulator.
#[derive(Parser)]
#[command(name = "hexaflight", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario headless, or serve it live to ground stations.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Serve the raw frame stream on this TCP address.
        #[arg(long)]
        serve: Option<SocketAddr>,
        /// WebSocket address; defaults to the stream port + 1.
        #[arg(long, requires = "serve")]
        ws: Option<SocketAddr>,
        /// Run as fast as possible without clients.
        #[arg(long, conflicts_with = "serve")]
        headless: bool,
        /// Simulated seconds per wall-clock second when serving.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Directory for session.tlog, truth.csv and events.log.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sizing report for a powertrain and environment config.
    Size {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Both)]
        format: Format,
    },
    /// Summarize a telemetry log.
    Replay {
        #[arg(long)]
        tlog: PathBuf,
        /// Dialect used to decode; defaults to the shipped one.
        #[arg(long)]
        dialect: Option<PathBuf>,
    },
    /// Validate a dialect file and list its messages.
    SchemaCheck {
        #[arg(long)]
        dialect: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Both,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn need_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("no such file: {}", path.display())))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), Failure> {
    let rt = |e: &dyn std::fmt::Display| Failure::Runtime(e.to_string());
    match cmd {
        Cmd::Size { config, format } => {
            need_file(&config)?;
            let cfg = SizingConfig::load(&config).map_err(|e| rt(&e))?;
            let report = cfg.report().map_err(|e| rt(&e))?;
            if matches!(format, Format::Text | Format::Both) {
                println!("{report}");
            }
            if matches!(format, Format::Json | Format::Both) {
                println!("{}", report.to_json());
            }
            Ok(())
        }
        Cmd::Replay { tlog, dialect } => {
            need_file(&tlog)?;
            let reg = match dialect {
                Some(d) => {
                    need_file(&d)?;
                    Arc::new(load_schema(&d).map_err(|e| rt(&e))?)
                }
                None => core_registry(),
            };
            let records = tlog_read_file(&tlog).map_err(|e| rt(&e))?;
            let summary = replay_tlog(&records, &reg);
            print!("{}", summary.render());
            let decoded: usize = summary.messages.values().sum();
            println!("decoded {decoded} of {} records", summary.records);
            if summary.undecodable > 0 {
                return Err(Failure::Runtime(format!(
                    "{} records failed to decode",
                    summary.undecodable
                )));
            }
            Ok(())
        }
        Cmd::SchemaCheck { dialect } => {
            need_file(&dialect)?;
            let reg = load_schema(&dialect).map_err(|e| rt(&e))?;
            println!("dialect {} with {} messages", reg.dialect, reg.len());
            for s in reg.schemas() {
                println!(
                    "  {:>3} {:<16} payload {:>3} B  crc_extra 0x{:02X}",
                    s.msg_id,
                    s.name,
                    s.payload_len(),
                    s.crc_extra
                );
            }
            Ok(())
        }
        Cmd::Run {
            scenario,
            seed,
            serve: serve_addr,
            ws,
            headless: _,
            speed,
            out,
        } => {
            need_file(&scenario)?;
            let mut s = Scenario::load(&scenario).map_err(|e| rt(&e))?;
            if seed.is_some() {
                s.seed = seed;
            }
            s.validate().map_err(|e| rt(&e))?;
            let out = out.unwrap_or_else(|| {
                PathBuf::from(format!("runs/{}-{}", s.name, s.seed.unwrap_or(0)))
            });
            let log = match serve_addr {
                Some(addr) => {
                    if s.script.is_empty() {
                        s.gcs.enabled = false;
                    }
                    let mut opts = ServeOptions::new(addr);
                    opts.ws_addr = Some(ws.unwrap_or_else(|| {
                        SocketAddr::new(addr.ip(), addr.port().wrapping_add(1))
                    }));
                    opts.speed = (speed > 0.0).then_some(speed);
                    serve(&s, &opts, Arc::new(AtomicBool::new(false))).map_err(|e| rt(&e))?
                }
                None => run_scenario(&s).map_err(|e| rt(&e))?,
            };
            log.write_dir(&out).map_err(|e| rt(&e))?;
            let last = log.truth.last();
            println!(
                "scenario {} seed {}: {} truth samples, {} tlog records, {} events",
                log.scenario,
                log.seed,
                log.truth.len(),
                log.tlog.len(),
                log.events.len()
            );
            if let Some(t) = last {
                let p = t.position_ned_m;
                println!("final mode {} at {:.2} {:.2} {:.2}", t.mode, p.x, p.y, p.z);
            }
            println!("outputs in {}", out.display());
            Ok(())
        }
    }
}
