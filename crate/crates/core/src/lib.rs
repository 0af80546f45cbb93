//! Ultrasound beamforming laboratory.
//!
//! The crate simulates multi-channel RF data for linear-array scanning
//! (monostatic synthetic aperture, synthetic transmit aperture, and phased
//! array), reconstructs sector images with delay-and-sum beamforming, and
//! trains a small neural network that emulates the focused channel data of a
//! larger aperture from the data of a smaller one.
//!
//! Everything is deterministic: seeded generators drive all randomness, and
//! re-running any operation with the same inputs reproduces its output
//! bit for bit.

pub mod array;
pub mod beamform;
pub mod config;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod tensor;
pub mod wavesim;

mod parallel;

pub use error::{Error, Result};
