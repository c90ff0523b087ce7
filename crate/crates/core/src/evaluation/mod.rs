//! Scoring of failure-probability estimates.
//!
//! Reference labels come from direct Monte Carlo over the same pool the
//! surrogate classifies ([`direct_mcs`]). Unstable is the positive class of
//! the [`Confusion`] matrix. [`PfReport`] collects the estimate, the scores
//! and the evaluation budget of one run. [`baseline_kriging`] is the
//! non-adaptive comparison method and [`analytic_suite`] lists cheap
//! benchmarks with known failure probabilities.

mod analytic;
mod baseline;
mod holdout;
mod mcs;
mod metrics;
mod report;

pub use analytic::{
    analytic_case, analytic_suite, brute_force_pf, AnalyticKind, AnalyticLimitState, Provenance,
    ReferencePf, REFERENCE_SAMPLES, REFERENCE_SEED,
};
pub use baseline::{baseline_design, baseline_kriging, BaselineOutcome};
pub use holdout::{holdout_set, HoldoutScore};
pub use mcs::{direct_mcs, FailurePolicy, McsFailure, McsResult};
pub use metrics::{confusion, cov_pf, Confusion};
pub use report::{Method, PfReport, REPORT_CSV_HEADER};
