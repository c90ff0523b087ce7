//! Ordinary-Kriging linear algebra on standardized data.

use faer::linalg::triangular_inverse::invert_lower_triangular;
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Parallelism, Side};
use nalgebra::{DMatrix, DVector};

use super::kernel::{matern52, matern52_distance};
use super::model::scale_rows;
use crate::error::{Error, Result};

pub(crate) const MAX_NUGGET: f64 = 1e-4;
const NUGGET_FLOOR: f64 = 1e-8;

/// Correlation matrix of row-major points, without nugget.
pub(crate) fn correlation_matrix(x: &[f64], dim: usize, theta: &[f64]) -> DMatrix<f64> {
    let n = x.len() / dim;
    let mut r = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        let xi = &x[i * dim..(i + 1) * dim];
        for j in 0..i {
            let v = matern52(xi, &x[j * dim..(j + 1) * dim], theta);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

/// Lower Cholesky factor `L` and `L⁻¹` of the symmetric matrix whose lower
/// triangle is `a` (row-major), or `None` if it is not positive definite.
fn cholesky_with_inverse(a: &[f64], n: usize) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let m = Mat::<f64>::from_fn(n, n, |i, j| if i >= j { a[i * n + j] } else { 0.0 });
    let l = m.cholesky(Side::Lower).ok()?.compute_l();
    let mut inv = Mat::<f64>::zeros(n, n);
    invert_lower_triangular(inv.as_mut(), l.as_ref(), Parallelism::None);
    let l_inv = DMatrix::from_fn(n, n, |i, j| if i >= j { inv.read(i, j) } else { 0.0 });
    let l = DMatrix::from_fn(n, n, |i, j| if i >= j { l.read(i, j) } else { 0.0 });
    l_inv.iter().all(|v| v.is_finite()).then_some((l, l_inv))
}

/// Factors `R + nugget * I`, multiplying the nugget by ten on failure until
/// it exceeds [`MAX_NUGGET`]. Returns `L`, `L⁻¹` and the nugget used.
#[allow(clippy::type_complexity)]
fn factor_with_nugget(
    x: &[f64],
    dim: usize,
    theta: &[f64],
    nugget: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let n = x.len() / dim;
    let scaled = scale_rows(x, theta);
    let mut r = vec![0.0; n * n];
    for i in 0..n {
        let xi = &scaled[i * dim..(i + 1) * dim];
        for j in 0..i {
            let xj = &scaled[j * dim..(j + 1) * dim];
            let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            r[i * n + j] = matern52_distance(d2.sqrt());
        }
    }
    let mut nu = nugget;
    loop {
        for i in 0..n {
            r[i * n + i] = 1.0 + nu;
        }
        if let Some((l, l_inv)) = cholesky_with_inverse(&r, n) {
            return Ok((l, l_inv, nu));
        }
        nu = if nu < NUGGET_FLOOR {
            NUGGET_FLOOR
        } else {
            nu * 10.0
        };
        if nu > MAX_NUGGET * (1.0 + 1e-9) {
            return Err(Error::Fit(format!(
                "correlation matrix not positive definite even with nugget {MAX_NUGGET:e}"
            )));
        }
    }
}

/// Factorized ordinary-Kriging system at fixed length-scales.
#[derive(Debug, Clone)]
pub(crate) struct OrdinarySystem {
    /// Lower Cholesky factor of `R + nugget * I`.
    pub l: DMatrix<f64>,
    /// Inverse of the lower Cholesky factor of `R + nugget * I`.
    pub l_inv: DMatrix<f64>,
    pub nugget: f64,
    /// R⁻¹ 1
    pub rinv_one: DVector<f64>,
    /// 1ᵀ R⁻¹ 1
    pub q: f64,
    pub beta: f64,
    /// R⁻¹ (y - 1 β)
    pub alpha: DVector<f64>,
}

impl OrdinarySystem {
    pub fn new(x: &[f64], dim: usize, y: &[f64], theta: &[f64], nugget: f64) -> Result<Self> {
        let (l, l_inv, nugget) = factor_with_nugget(x, dim, theta, nugget)?;
        let n = y.len();
        let solve = |v: &DVector<f64>| l_inv.tr_mul(&(&l_inv * v));
        let rinv_one = solve(&DVector::from_element(n, 1.0));
        let rinv_y = solve(&DVector::from_column_slice(y));
        let q = rinv_one.sum();
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::Fit(format!("1ᵀR⁻¹1 = {q} is not positive")));
        }
        let beta = rinv_y.sum() / q;
        let alpha = &rinv_y - &rinv_one * beta;
        Ok(OrdinarySystem {
            l,
            l_inv,
            nugget,
            rinv_one,
            q,
            beta,
            alpha,
        })
    }

    /// Overwrites the columns of `r` with `L⁻¹ r`.
    pub fn solve_lower(&self, r: &mut DMatrix<f64>) {
        let n = self.l.nrows();
        let c = r.ncols();
        let l = faer::mat::from_column_major_slice::<f64>(self.l.as_slice(), n, n);
        let rhs = faer::mat::from_column_major_slice_mut::<f64>(r.as_mut_slice(), n, c);
        solve_lower_triangular_in_place(l, rhs, Parallelism::None);
    }

    /// Leave-one-out residuals `y_i - μ₋ᵢ(x_i)` and normalized variances
    /// `c₋ᵢ(x_i)` from the factorization of the full system.
    ///
    /// With `M = R⁻¹ - R⁻¹11ᵀR⁻¹ / Q`, the residual is `(M y)_i / M_ii` and
    /// `1 / M_ii` is the held-out variance with the nugget included in the
    /// prior, so the nugget is subtracted to match a literal refit.
    pub fn loo(&self, y: &[f64]) -> Loo {
        let n = y.len();
        let mut residuals = Vec::with_capacity(n);
        let mut variances = Vec::with_capacity(n);
        // R⁻¹ = L⁻ᵀ L⁻¹ so diag(R⁻¹)_i = sum_k (L⁻¹)_{k,i}^2
        for i in 0..n {
            let col = self.l_inv.column(i);
            let rinv_ii: f64 = col.rows(i, n - i).norm_squared();
            let a = self.rinv_one[i];
            let m_ii = rinv_ii - a * a / self.q;
            // (M y)_i = (R⁻¹ y)_i - a (1ᵀR⁻¹y)/Q = alpha_i
            let my = self.alpha[i];
            residuals.push(my / m_ii);
            variances.push(1.0 / m_ii - self.nugget);
        }
        Loo {
            residuals,
            variances,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Loo {
    pub residuals: Vec<f64>,
    pub variances: Vec<f64>,
}

impl Loo {
    pub fn sse(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }

    /// Process variance from normalized LOO residuals.
    pub fn process_variance(&self) -> f64 {
        let n = self.residuals.len() as f64;
        self.residuals
            .iter()
            .zip(&self.variances)
            .map(|(r, c)| r * r / c)
            .sum::<f64>()
            / n
    }
}
