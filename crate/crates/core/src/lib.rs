//! Modeling, simulation and characterization of below-threshold optical
//! parametric amplifier (OPA) squeezed-light sources.
//!
//! - [`quadrature`]: squeezing/anti-squeezing variance model and the loss,
//!   phase-jitter, rotation and normalisation transforms.
//! - [`cavity`]: ABCD eigenmode, FSR, finesse and linewidth of standing-wave
//!   resonators.
//! - [`estimation`]: weighted Levenberg-Marquardt fit of efficiency,
//!   threshold and phase jitter to pump-sweep data.
//! - [`synth`]: seeded synthetic traces, sweeps and spectra, plus trace
//!   reduction.
//! - [`formats`] and [`config`]: CSV data files and JSON run documents.

pub mod cavity;
pub mod config;
pub mod error;
pub mod estimation;
pub mod formats;
pub mod quadrature;
pub mod synth;
pub mod units;

pub use error::{Error, ErrorClass, Result};
pub use estimation::{Dataset, FitConfig, FitResult, MeasurementPoint, Quadrature};
pub use quadrature::{CavityConstants, OperatingPoint, SqueezerParams, VariancePair};
