//! Kriging-based active learning for estimating small probabilities of
//! transient instability.
//!
//! The pieces:
//!
//! - [`sampling`]: uncertain-input models (Gaussian copula, Latin hypercube,
//!   wind power curve, empirical marginals).
//! - [`powersim`]: classical multi-machine transient simulator and the
//!   critical-clearing-time based stability margin.
//! - [`kriging`]: ordinary Kriging with an anisotropic Matérn-5/2 kernel fitted
//!   by leave-one-out cross-validation.
//! - [`active_learning`]: the U-function enrichment loop.
//! - [`evaluation`]: direct Monte Carlo references, confusion metrics,
//!   analytic benchmarks and the one-shot Kriging baseline.

// `!(x > 0.0)` is used on purpose so NaN fails validation; index loops
// mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod active_learning;
pub mod error;
pub mod evaluation;
pub mod kriging;
pub mod powersim;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
