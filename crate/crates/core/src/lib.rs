//! Channel estimation for RIS-aided mmWave multi-user uplinks with
//! hardware-limited task-based quantization.
//!
//! The crate covers the geometric channel model, the uplink training
//! protocol, a dithered uniform ADC model, the task-based cascaded and
//! two-stage individual-channel estimators, reference baselines, and a
//! Monte-Carlo sweep harness that writes NMSE results as CSV.

pub mod baselines;
pub mod channel;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod pilot;
pub mod quantizer;
pub mod selftest;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector};
