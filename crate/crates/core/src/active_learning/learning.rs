use crate::error::{Error, Result};

/// U learning function `|μ| / σ`: the distance of the predicted margin from
/// zero in predictive standard deviations. Infinite when σ = 0.
pub fn u_value(mean: f64, std: f64) -> f64 {
    if std > 0.0 {
        mean.abs() / std
    } else {
        f64::INFINITY
    }
}

/// Indices of the `n_e` smallest finite U values not yet enriched, in
/// increasing U order with ties going to the lower index. Returns fewer
/// when fewer candidates remain.
pub fn select_enrichment(u: &[f64], enriched: &[bool], n_e: usize) -> Result<Vec<usize>> {
    if u.is_empty() {
        return Err(Error::config("cannot select from an empty pool"));
    }
    if enriched.len() != u.len() {
        return Err(Error::Invariant(format!(
            "enrichment mask has {} entries for a pool of {}",
            enriched.len(),
            u.len()
        )));
    }
    let mut cand: Vec<usize> = (0..u.len())
        .filter(|&i| !enriched[i] && u[i].is_finite())
        .collect();
    let cmp = |a: &usize, b: &usize| u[*a].total_cmp(&u[*b]).then(a.cmp(b));
    if cand.len() > n_e && n_e > 0 {
        cand.select_nth_unstable_by(n_e - 1, cmp);
        cand.truncate(n_e);
    }
    cand.truncate(n_e);
    cand.sort_by(cmp);
    Ok(cand)
}

/// Fraction of strictly negative predicted margins.
pub fn estimate_pf(mean: &[f64]) -> Result<f64> {
    if mean.is_empty() {
        return Err(Error::config(
            "cannot estimate a probability over an empty pool",
        ));
    }
    let n_fail = mean.iter().filter(|m| **m < 0.0).count();
    Ok(n_fail as f64 / mean.len() as f64)
}

/// Stopping rule on the estimate history: the last `l_ck` estimates must
/// satisfy `(max − min) / min ≤ eps` with `min > 0`.
///
/// The comparison allows a relative slack of [`STOP_SLACK`] so that a ratio
/// equal to `eps` in decimal (e.g. 0.0100 → 0.0102 with `eps = 0.02`) still
/// stops despite binary rounding.
pub fn check_stop(history: &[f64], eps: f64, l_ck: usize) -> bool {
    if l_ck == 0 || history.len() < l_ck {
        return false;
    }
    let window = &history[history.len() - l_ck..];
    let min = window.iter().copied().fold(f64::INFINITY, f64::min);
    let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // an all-zero window cannot be normalized and never stops the loop
    min > 0.0 && (max - min) / min <= eps * (1.0 + STOP_SLACK)
}

pub const STOP_SLACK: f64 = 1e-12;
