//! Information complexity of supervised learning tasks.
//!
//! Two engines share one set of datasets. The [`oracle`] module enumerates a
//! finite, prefix-coded hypothesis family exactly, with explicit code lengths
//! standing in for description complexity. The [`variational`] module fits
//! diagonal Gaussian posteriors over the weights of small networks from
//! [`models`] and measures the information they carry as a KL divergence to
//! an isotropic prior. All quantities are in NATS.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annealing;
pub mod bounds;
pub mod curve;
pub mod distance;
pub mod error;
pub mod models;
pub mod oracle;
mod par;
pub mod rng;
pub mod svg;
pub mod tasks;
pub mod variational;

pub use curve::{Curve, CurvePoint};
pub use error::{Error, ParseError, Result};
