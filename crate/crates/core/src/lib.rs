//! Photoacoustic image reconstruction for linear transducer arrays.
//!
//! The pipeline is: simulate or load real RF channel data, convert it to
//! analytic form, reconstruct a complex image with one of three
//! beamformers, then detect the envelope, log-compress and measure it.
//!
//! * [`beamformers::Method::Das`]: delay-and-sum with uniform apodization.
//! * [`beamformers::Method::Mv`]: minimum variance with spatial smoothing,
//!   diagonal loading and temporal averaging.
//! * [`beamformers::Method::Dmv`]: double minimum variance. The weighted
//!   subarray outputs of the MV stage are treated as a virtual array and
//!   combined by a second MV stage instead of being summed.

pub mod beamformers;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod phantom;
pub mod signal;

pub use error::{Error, Result};
