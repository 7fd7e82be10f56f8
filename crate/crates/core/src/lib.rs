//! Detection, deterrence and communication building blocks for an automated
//! human-elephant conflict prevention network.
//!
//! The crate is organised the way a deployment is:
//!
//! - [`signal`]: sampled traces and audio clips, spectra, STFT, synthesis, file I/O.
//! - [`seismic`]: the windowed detection-score algorithm run on peripheral nodes,
//!   the STFT reference detector and recall evaluation.
//! - [`deterrent`]: anti-habituation bee-sound modifications and the spectrogram
//!   similarity metric.
//! - [`pn`]: the peripheral-node state machine.
//! - [`cn`]: the central-node decision pipeline, pluggable detectors, warnings and
//!   IoU / AP50 evaluation.
//! - [`mesh`]: a deterministic discrete-event pub/sub mesh with broker failover.
//! - [`harness`]: scenarios, end-to-end runs and metrics.

// Validation is written as `!(x > 0.0)` throughout so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cn;
pub mod deterrent;
pub mod error;
pub mod harness;
pub mod mesh;
pub mod pn;
pub mod seed;
pub mod seismic;
pub mod signal;

pub use error::{Error, Result};
