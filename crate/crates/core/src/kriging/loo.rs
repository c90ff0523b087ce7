use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::algebra::{correlation_matrix, OrdinarySystem};
use super::kernel::matern52;
use super::model::validate_training;
use crate::error::{Error, Result};
use crate::sampling::SampleSet;

/// Held-out prediction at one training point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LooPoint {
    pub mean: f64,
    /// Kriging variance divided by σ_z².
    pub normalized_variance: f64,
}

/// Ordinary-Kriging prediction at row `leave_out` from the dataset with that
/// row removed, computed literally by refitting the reduced system.
///
/// Coordinates are used as given (no standardization).
pub fn loo_prediction(
    x: &SampleSet,
    t: &[f64],
    theta: &[f64],
    nugget: f64,
    leave_out: usize,
) -> Result<LooPoint> {
    validate_training(x, t)?;
    let n = x.len();
    if n < 3 {
        return Err(Error::Fit(format!(
            "leave-one-out needs at least 3 samples, got {n}"
        )));
    }
    if leave_out >= n {
        return Err(Error::config(format!(
            "row {leave_out} out of range for {n} samples"
        )));
    }
    let dim = x.dim();
    let keep: Vec<usize> = (0..n).filter(|&i| i != leave_out).collect();
    let reduced = x.select(&keep, x.tag());
    let t_red: Vec<f64> = keep.iter().map(|&i| t[i]).collect();

    let r = correlation_matrix(reduced.as_flat(), dim, theta);
    let mut a = r;
    for i in 0..a.nrows() {
        a[(i, i)] += nugget;
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Singular("reduced correlation matrix".into()))?;
    let ones = DVector::from_element(n - 1, 1.0);
    let yv = DVector::from_column_slice(&t_red);
    let rinv_one = chol.solve(&ones);
    let q = rinv_one.sum();
    let beta = chol.solve(&yv).sum() / q;
    let x0 = x.row(leave_out);
    let r0 = DVector::from_fn(n - 1, |i, _| matern52(x0, reduced.row(i), theta));
    let rinv_r0 = chol.solve(&r0);
    let mean = beta + rinv_r0.dot(&(&yv - &ones * beta));
    let u = 1.0 - rinv_r0.sum();
    let normalized_variance = 1.0 - r0.dot(&rinv_r0) + u * u / q;
    Ok(LooPoint {
        mean,
        normalized_variance,
    })
}

/// All leave-one-out predictions from a single factorization of the full
/// system. Agrees with [`loo_prediction`] up to round-off.
pub fn loo_all(x: &SampleSet, t: &[f64], theta: &[f64], nugget: f64) -> Result<Vec<LooPoint>> {
    validate_training(x, t)?;
    if x.len() < 2 {
        return Err(Error::Fit("leave-one-out needs at least 2 samples".into()));
    }
    let sys = OrdinarySystem::new(x.as_flat(), x.dim(), t, theta, nugget)?;
    let loo = sys.loo(t);
    Ok(loo
        .residuals
        .iter()
        .zip(&loo.variances)
        .zip(t)
        .map(|((res, c), y)| LooPoint {
            mean: y - res,
            normalized_variance: *c,
        })
        .collect())
}
