use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::cov_pf;
use crate::active_learning::Evaluator;
use crate::error::{Error, Result};
use crate::sampling::SampleSet;

/// What direct Monte Carlo does with samples the evaluator fails on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Stop with the error of the lowest-index failing sample.
    #[default]
    Abort,
    /// Label the sample unstable and record the failure.
    CountUnstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsFailure {
    pub index: usize,
    pub message: String,
}

/// Reference labels from evaluating every sample of a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsResult {
    /// `true` where the sample is unstable (margin < 0).
    pub labels: Vec<bool>,
    pub pf_ref: f64,
    /// Coefficient of variation of `pf_ref`; `None` when it is 0 or 1.
    pub cov_pf: Option<f64>,
    pub n_evaluations: usize,
    pub failures: Vec<McsFailure>,
}

impl McsResult {
    pub fn n_unstable(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }
}

/// Labels every sample of `pool` with the evaluator's failure test.
///
/// Evaluations run in parallel; labels come back in pool order.
pub fn direct_mcs<E: Evaluator + ?Sized>(
    evaluator: &E,
    pool: &SampleSet,
    policy: FailurePolicy,
) -> Result<McsResult> {
    if pool.is_empty() {
        return Err(Error::config(
            "direct Monte Carlo needs at least one sample",
        ));
    }
    if pool.dim() != evaluator.dim() {
        return Err(Error::config(format!(
            "samples have {} inputs, evaluator takes {}",
            pool.dim(),
            evaluator.dim()
        )));
    }
    let rows: Vec<&[f64]> = pool.rows().collect();
    let results: Vec<Result<bool>> = rows.par_iter().map(|x| evaluator.is_failure(x)).collect();
    let mut labels = Vec::with_capacity(rows.len());
    let mut failures = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(l) => labels.push(l),
            Err(e) => match policy {
                FailurePolicy::Abort => {
                    return Err(Error::Evaluation(format!("sample {index}: {e}")));
                }
                FailurePolicy::CountUnstable => {
                    labels.push(true);
                    failures.push(McsFailure {
                        index,
                        message: e.to_string(),
                    });
                }
            },
        }
    }
    let n = labels.len();
    let pf_ref = labels.iter().filter(|l| **l).count() as f64 / n as f64;
    Ok(McsResult {
        labels,
        pf_ref,
        cov_pf: cov_pf(pf_ref, n).ok(),
        n_evaluations: n,
        failures,
    })
}
