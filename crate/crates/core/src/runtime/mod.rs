//! Scenario-driven simulation: loading, the deterministic loop, operator
//! links, live serving and log replay.

pub mod gcs;
pub mod replay;
pub mod scenario;
pub mod server;
pub mod sim;

use thiserror::Error;

pub use replay::{replay_tlog, ReplaySummary};
pub use scenario::{Rates, Scenario, ScriptAction, ScriptEntry};
pub use server::{serve, ServeOptions};
pub use sim::{
    run_scenario, SessionEvent, SessionLog, SimEvent, Simulation, TruthSample, VisionSample,
};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("dynamics: {0}")]
    Dynamics(String),
    #[error("protocol: {0}")]
    Proto(#[from] crate::proto::ProtoError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
