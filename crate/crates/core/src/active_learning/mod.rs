//! Active-learning estimation of a small failure probability.
//!
//! A Kriging surrogate of the margin is fitted on a small Latin hypercube
//! design and used to classify a large Monte Carlo pool. At each iteration
//! the `n_e` pool samples with the smallest U value `|μ|/σ` (those whose
//! predicted sign is least certain) are evaluated with the expensive
//! evaluator and added to the training set. The loop stops when the pool
//! estimate of the failure probability has settled over the last `l_ck`
//! iterations, or at the iteration cap.

mod driver;
pub(crate) use driver::evaluate_batch;
mod evaluator;
mod learning;
mod state;

pub use driver::{
    al_initial_design, al_pool, iteration_fit_config, run_al, run_al_with, ALAbort, ALOutcome,
    IterationSummary, Timing,
};
pub use evaluator::{Evaluator, FnEvaluator};
pub use learning::{check_stop, estimate_pf, select_enrichment, u_value, STOP_SLACK};
pub use state::{ALConfig, ALState, EnrichmentRecord, EvaluationFailure, StopReason};

#[cfg(test)]
mod tests;
