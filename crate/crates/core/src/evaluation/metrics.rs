use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion matrix of predicted against reference instability, with
/// unstable as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub n_tp: usize,
    pub n_fp: usize,
    pub n_fn: usize,
    pub n_tn: usize,
    /// `n_tp / (n_tp + n_fn)`, or 0 when there are no reference positives.
    pub tpr: f64,
    /// `n_fp / (n_fp + n_tp)`, or 0 when nothing is predicted unstable.
    pub fdr: f64,
    pub tpr_undefined: bool,
    pub fdr_undefined: bool,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.n_tp + self.n_fp + self.n_fn + self.n_tn
    }

    /// Reference failure fraction `(n_tp + n_fn) / total`.
    pub fn reference_pf(&self) -> f64 {
        (self.n_tp + self.n_fn) as f64 / self.total() as f64
    }

    /// Predicted failure fraction `(n_tp + n_fp) / total`.
    pub fn predicted_pf(&self) -> f64 {
        (self.n_tp + self.n_fp) as f64 / self.total() as f64
    }
}

/// Scores predicted margins against reference labels (`true` = unstable).
/// A prediction is unstable when its margin is strictly negative.
pub fn confusion(pred: &[f64], truth: &[bool]) -> Result<Confusion> {
    if pred.len() != truth.len() {
        return Err(Error::config(format!(
            "{} predictions for {} reference labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::config("confusion matrix of an empty sample"));
    }
    let (mut n_tp, mut n_fp, mut n_fn, mut n_tn) = (0, 0, 0, 0);
    for (m, t) in pred.iter().zip(truth) {
        match (*m < 0.0, *t) {
            (true, true) => n_tp += 1,
            (true, false) => n_fp += 1,
            (false, true) => n_fn += 1,
            (false, false) => n_tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            (0.0, true)
        } else {
            (num as f64 / den as f64, false)
        }
    };
    let (tpr, tpr_undefined) = ratio(n_tp, n_tp + n_fn);
    let (fdr, fdr_undefined) = ratio(n_fp, n_fp + n_tp);
    Ok(Confusion {
        n_tp,
        n_fp,
        n_fn,
        n_tn,
        tpr,
        fdr,
        tpr_undefined,
        fdr_undefined,
    })
}

/// Coefficient of variation `sqrt((1 − p) / (n p))` of a Monte Carlo
/// estimate `p` from `n` samples.
pub fn cov_pf(pf: f64, n: usize) -> Result<f64> {
    if !(pf > 0.0 && pf < 1.0) {
        return Err(Error::config(format!(
            "coefficient of variation needs 0 < pf < 1, got {pf}"
        )));
    }
    if n == 0 {
        return Err(Error::config("coefficient of variation needs n >= 1"));
    }
    Ok(((1.0 - pf) / (n as f64 * pf)).sqrt())
}
