//! Signal processing and scoring core for roadside driving-noise monitoring.
//!
//! The crate is `no_std` (with `alloc`) and performs no IO. It covers the
//! whole computational pipeline:
//!
//! * [`dsp`]: Hann windows, FFT, whole-buffer band-pass masking, envelopes and
//!   time-averaged spectra.
//! * [`extract`]: driving-event detection as sustained envelope peaks.
//! * [`features`]: fixed-shape log-spectrogram patches per event.
//! * [`autoencoder`]: a non-compressive fully connected autoencoder scored by
//!   reconstruction MSE.
//! * [`eval`]: event matching, AUROC and the summer/winter scenario report.
//! * [`synth`]: a seeded generator of labelled roadside recordings with ground
//!   truth.
//!
//! File formats, the CLI and parallel orchestration live in the `roadnoise`
//! crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod audio;
pub mod autoencoder;
pub mod config;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod extract;
pub mod features;
mod kernels;
pub mod pipeline;
pub mod stats;
pub mod synth;

pub use audio::AudioBuffer;
pub use config::PipelineConfig;
pub use error::{Error, Result};
