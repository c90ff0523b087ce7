use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kriging::min_training_size;
use crate::sampling::SampleSet;

/// Iteration parameters of the enrichment loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ALConfig {
    /// Samples added per iteration.
    pub n_e: usize,
    /// Iteration cap.
    pub l_max: usize,
    /// Relative tolerance of the stopping rule.
    pub eps_s: f64,
    /// Number of recent estimates the stopping rule inspects.
    pub l_ck: usize,
    /// Candidate pool size N_V.
    pub n_pool: usize,
    /// Initial Latin hypercube size N₀.
    pub n_initial: usize,
    pub seed: u64,
}

impl Default for ALConfig {
    fn default() -> Self {
        ALConfig {
            n_e: 10,
            l_max: 40,
            eps_s: 0.02,
            l_ck: 5,
            n_pool: 100_000,
            n_initial: 50,
            seed: 0,
        }
    }
}

impl ALConfig {
    /// Checks the parameters for an input space of dimension `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let fail = |m: String| Err(Error::config(m));
        if self.n_e < 1 {
            return fail("n_e must be >= 1".into());
        }
        if self.l_max < 1 {
            return fail("l_max must be >= 1".into());
        }
        if !(self.eps_s > 0.0 && self.eps_s.is_finite()) {
            return fail(format!("eps_s must be > 0, got {}", self.eps_s));
        }
        if self.l_ck < 2 || self.l_ck > self.l_max {
            return fail(format!(
                "l_ck must satisfy 2 <= l_ck <= l_max, got l_ck = {} with l_max = {}",
                self.l_ck, self.l_max
            ));
        }
        if self.n_pool < 10 * self.n_e {
            return fail(format!(
                "n_pool must be at least 10 * n_e = {}, got {}",
                10 * self.n_e,
                self.n_pool
            ));
        }
        let min = min_training_size(dim);
        if self.n_initial < min {
            return fail(format!(
                "n_initial must be at least {min} for {dim} inputs, got {}",
                self.n_initial
            ));
        }
        Ok(())
    }

    /// Largest number of evaluator calls the loop can make.
    pub fn max_evaluations(&self) -> usize {
        self.n_initial + self.n_e * (self.l_max - 1)
    }
}

/// Why the loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CriterionMet,
    IterationCap,
    /// No pool candidates with positive predictive variance remain.
    EvaluatorExhausted,
}

/// One batch of enrichment samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentRecord {
    pub iteration: usize,
    pub pool_indices: Vec<usize>,
    pub u_values: Vec<f64>,
    /// Surrogate means at the selected samples before evaluation.
    pub predicted_means: Vec<f64>,
    /// Evaluated margins; `None` where the evaluator failed.
    pub margins: Vec<Option<f64>>,
}

/// A sample the evaluator could not handle. It is left out of the training
/// set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationFailure {
    pub iteration: usize,
    /// Pool index for enrichment samples, `None` for the initial design.
    pub pool_index: Option<usize>,
    pub x: Vec<f64>,
    pub message: String,
}

/// Evolving state of the loop; iteration `l` means `l` surrogates have
/// been fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ALState {
    pub iteration: usize,
    pub training_inputs: SampleSet,
    pub training_outputs: Vec<f64>,
    pub pool: SampleSet,
    /// Predictive mean and standard deviation over the pool from the most
    /// recent surrogate.
    pub pool_mean: Vec<f64>,
    pub pool_std: Vec<f64>,
    pub pf_history: Vec<f64>,
    /// Length-scales fitted at each iteration.
    pub theta_history: Vec<Vec<f64>>,
    pub enrichment_log: Vec<EnrichmentRecord>,
    pub failures: Vec<EvaluationFailure>,
    pub evaluator_calls: usize,
    pub stop_reason: Option<StopReason>,
}

impl ALState {
    /// Enrichment iterations that completed (batches evaluated).
    pub fn enrichment_iterations(&self) -> usize {
        self.enrichment_log.len()
    }

    /// Final failure-probability estimate.
    pub fn pf(&self) -> Option<f64> {
        self.pf_history.last().copied()
    }

    pub fn enriched_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.pool.len()];
        for rec in &self.enrichment_log {
            for &i in &rec.pool_indices {
                mask[i] = true;
            }
        }
        mask
    }

    /// Checks the structural invariants of the state.
    pub fn check(&self, cfg: &ALConfig) -> Result<()> {
        let bad = |m: String| Err(Error::Invariant(m));
        if self.pf_history.len() != self.iteration {
            return bad(format!(
                "{} estimates recorded after {} iterations",
                self.pf_history.len(),
                self.iteration
            ));
        }
        let mut seen = vec![false; self.pool.len()];
        for rec in &self.enrichment_log {
            if rec.pool_indices.len() > cfg.n_e {
                return bad(format!(
                    "iteration {} enriched more than n_e",
                    rec.iteration
                ));
            }
            for &i in &rec.pool_indices {
                if i >= seen.len() || seen[i] {
                    return bad(format!("pool index {i} enriched twice or out of range"));
                }
                seen[i] = true;
            }
        }
        if self.training_inputs.len() != self.training_outputs.len() {
            return bad("training inputs and outputs differ in length".into());
        }
        Ok(())
    }
}
