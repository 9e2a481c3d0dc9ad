//! Loss-of-effectiveness detection for quadrotor actuators.
//!
//! Raw IMU and rotor-speed samples pass through a second-order low-pass
//! ([`signal`]), a per-actuator effectiveness estimate is tracked with a
//! Kalman filter over the linear observation model ([`model`], [`estimator`]),
//! and a failure-probability test latches failed actuators ([`decision`]).
//! [`detector::Detector`] wires these together at the sensor rate.
//!
//! [`sim`] produces labelled flight logs and [`replay`] scores logs and runs
//! parameter sweeps.

pub mod config;
pub mod decision;
pub mod detector;
pub mod error;
pub mod estimator;
pub mod model;
pub mod replay;
pub mod signal;
pub mod sim;

pub use config::DetectorConfig;
pub use detector::{Detector, DetectorOutput};
pub use error::{Error, Result};
pub use signal::RawSample;
