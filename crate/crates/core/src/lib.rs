//! Secret key rates for continuous-variable QKD over multispan amplified
//! fiber links.
//!
//! States are Gaussian and tracked through their covariance matrices in
//! shot-noise units with `(q1, p1, q2, p2, ...)` ordering.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod composable;
pub mod config;
pub mod error;
pub mod gaussian;
pub mod link;
pub mod optimize;
pub mod protocol;
pub mod selfcheck;
pub mod ultimate;
pub mod unconditional;

pub use error::{Error, Result};
pub use gaussian::{CovarianceMatrix, GaussianCPMap, MeasurementKind, Quadrature};
pub use link::{Amplifier, LinkConfig};
pub use optimize::OptimizerSettings;
pub use protocol::{KeyRateResult, ProtocolCase, SecurityParams};
