//! Monostatic OFDM radar simulation built on LTE / 5G NR style downlink
//! waveforms.
//!
//! The crate is organized along the processing chain:
//!
//! - [`waveform`]: numerologies, transmit resource grids, OFDM (de)modulation
//! - [`scene`]: point targets, clutter, noise and self-interference coupling,
//!   synthesized either directly on the subcarrier grid or in the time domain
//! - [`radarproc`]: quotient processing, null-subcarrier interpolation,
//!   range-Doppler periodogram, CFAR threshold and peak estimation
//! - [`canceller`]: multi-tap RF canceller and memory-polynomial digital
//!   canceller with self-orthogonalizing adaptation
//! - [`experiments`]: Monte-Carlo harnesses built from the above
//!
//! Nothing in this crate touches the filesystem; file formats and the
//! command-line front-end live in the companion `ofdm-radar-cli` crate.

pub mod canceller;
pub mod error;
pub mod experiments;
pub mod radarproc;
pub mod scene;
pub mod waveform;

mod rng;
pub mod signal;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
