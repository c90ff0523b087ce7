use crate::error::Result;

/// The expensive limit-state function: a signed margin whose negative values
/// mark failure (instability).
///
/// Implementations must be deterministic in `x` and callable from several
/// threads at once.
pub trait Evaluator: Sync {
    /// Number of inputs expected in `x`.
    fn dim(&self) -> usize;

    /// Margin at `x`. Errors are per-sample evaluation failures.
    fn margin(&self, x: &[f64]) -> Result<f64>;

    /// Whether `x` fails (`margin < 0`). Evaluators with a cheaper exact
    /// test override this; the answer must agree with the sign of
    /// [`Evaluator::margin`].
    fn is_failure(&self, x: &[f64]) -> Result<bool> {
        Ok(self.margin(x)? < 0.0)
    }
}

/// Adapts a closure into an [`Evaluator`].
pub struct FnEvaluator<F> {
    dim: usize,
    f: F,
}

impl<F> FnEvaluator<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnEvaluator { dim, f }
    }
}

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn margin(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn margin(&self, x: &[f64]) -> Result<f64> {
        (**self).margin(x)
    }

    fn is_failure(&self, x: &[f64]) -> Result<bool> {
        (**self).is_failure(x)
    }
}
