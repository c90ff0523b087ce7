//! Ordinary Kriging with an anisotropic Matérn-5/2 correlation.
//!
//! The response is modelled as a Gaussian process with unknown constant mean
//! β, process variance σ_z² and correlation R(x, x'; θ). Given training data
//! the predictor is
//!
//! ```text
//! μ(x₀)  = β̂ + rᵀ R⁻¹ (T − 1β̂)
//! σ²(x₀) = σ_z² [1 − rᵀ R⁻¹ r + u²/Q],   u = 1 − 1ᵀR⁻¹r,  Q = 1ᵀR⁻¹1
//! β̂      = 1ᵀR⁻¹T / Q
//! ```
//!
//! θ is chosen by minimizing the leave-one-out squared error with a hybrid
//! genetic algorithm, and σ_z² is the mean of the squared LOO residuals
//! normalized by their LOO variances.
//!
//! Inputs and outputs are standardized before fitting; θ is therefore in
//! standardized input units.

mod algebra;
mod fit;
mod kernel;
mod loo;
mod model;
mod optimize;

pub use fit::{fit, fit_with_warm_start, min_training_size, FitConfig, FitDiagnostics};
pub use kernel::{matern52, matern52_distance};
pub use loo::{loo_all, loo_prediction, LooPoint};
pub use model::{KrigingModel, KrigingModelDump, Predictions, Standardization};
pub use optimize::{hybrid_minimize, nelder_mead, GaSettings, OptimResult};
