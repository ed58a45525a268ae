//! Deterministic hexacopter flight-stack simulator.
//!
//! The crate is organised bottom-up:
//!
//! * [`atmos`] standard atmosphere and powertrain sizing
//! * [`dynamics`] rigid-body truth model with motors, battery and wind
//! * [`sensors`] IMU, magnetometer, barometer and GPS models
//! * [`estimator`] complementary attitude and position filters
//! * [`control`] flight modes, cascaded controllers, mixer, failsafes
//! * [`proto`] telemetry wire protocol and log format
//! * [`bus`] brokerless publish/subscribe, image hub and link bridging
//! * [`vision`] synthetic camera, centroid extraction and tracking guidance
//! * [`runtime`] scenario loader, scheduler, ground-station server

pub mod atmos;
pub mod bus;
pub mod control;
pub mod dynamics;
pub mod estimator;
pub mod proto;
pub mod runtime;
pub mod sensors;
pub mod vision;
