//! Uncertainty maps for point-sampled network-quality measurements.
//!
//! The crate is organised as a pipeline:
//!
//! * [`geodata`] ingests tile measurements, projects them to a local planar
//!   frame, indexes them with an exact k-d tree and filters outliers.
//! * [`kernel`] fits Nadaraya–Watson regression with a self-tuning bandwidth
//!   `h(x) = c · R_k(x)²` and selects `(k, c)` by cross-validation.
//! * [`conformal`] wraps the regressor with split conformal prediction, an
//!   EnbPI-style ensemble baseline and ensemble spatial conformal prediction
//!   (local bootstrap ensembles calibrated by a quantile regression forest).
//! * [`evalharness`] generates synthetic fields with known ground truth and
//!   scores interval methods by coverage and width.

pub mod conformal;
pub mod error;
pub mod evalharness;
pub mod geodata;
pub mod kernel;
pub mod seeding;

pub use error::{Error, Result};
