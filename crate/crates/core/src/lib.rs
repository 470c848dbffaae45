//! Spatial-wideband mmWave massive MIMO uplink simulator with hybrid
//! combining, low-resolution ADCs and a gridless greedy channel estimator.

pub mod channel;
pub mod config;
pub mod cv_analysis;
pub mod error;
pub mod estimator;
pub mod frontend;
pub mod harness;
pub mod numerics;

pub use config::{Resolution, SystemConfig};
pub use error::{Error, Result};
