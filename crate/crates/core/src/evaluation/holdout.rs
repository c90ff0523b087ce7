use serde::{Deserialize, Serialize};

use super::mcs::McsResult;
use super::metrics::{confusion, Confusion};
use crate::active_learning::estimate_pf;
use crate::error::{Error, Result};
use crate::kriging::KrigingModel;
use crate::rng::sub_seed;
use crate::sampling::{mc_sample, SampleSet, UncertaintySpec};

/// Independent Monte Carlo test set of `n` samples seeded from the
/// `"test"` sub-seed of `seed`; disjoint in stream from the pool.
pub fn holdout_set(spec: &UncertaintySpec, n: usize, seed: u64) -> Result<SampleSet> {
    mc_sample(&spec.with_seed(sub_seed(seed, "test")), n)
}

/// Classification scores of a surrogate on samples it never saw as
/// candidates, so runs with different pool sizes share one yardstick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutScore {
    pub n: usize,
    pub pf_ref: f64,
    pub pf_pred: f64,
    pub confusion: Confusion,
}

impl HoldoutScore {
    pub fn new(model: &KrigingModel, test: &SampleSet, truth: &McsResult) -> Result<Self> {
        if truth.labels.len() != test.len() {
            return Err(Error::config(format!(
                "{} reference labels for {} test samples",
                truth.labels.len(),
                test.len()
            )));
        }
        let mean = model.predict(test).mean;
        Ok(HoldoutScore {
            n: test.len(),
            pf_ref: truth.pf_ref,
            pf_pred: estimate_pf(&mean)?,
            confusion: confusion(&mean, &truth.labels)?,
        })
    }
}
