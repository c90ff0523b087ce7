use std::time::Instant;

use super::mcs::McsResult;
use super::report::{Method, PfReport};
use crate::active_learning::{evaluate_batch, EvaluationFailure, Evaluator, Timing};
use crate::error::{Error, Result};
use crate::kriging::{fit, min_training_size, FitConfig, KrigingModel};
use crate::rng::sub_seed;
use crate::sampling::{lhs_sample, SampleSet, SampleTag, UncertaintySpec};

/// Result of a one-shot surrogate run.
#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub model: KrigingModel,
    pub report: PfReport,
    /// Design points the evaluator failed on; left out of the fit.
    pub failures: Vec<EvaluationFailure>,
}

/// Latin hypercube design of `n_c` points seeded from the `"baseline"`
/// sub-seed of `seed`.
pub fn baseline_design(spec: &UncertaintySpec, n_c: usize, seed: u64) -> Result<SampleSet> {
    lhs_sample(&spec.with_seed(sub_seed(seed, "baseline")), n_c)
}

/// Kriging without enrichment: evaluate a Latin hypercube design of `n_c`
/// points, fit once, and classify `pool` with the surrogate mean. `n_c`
/// must reach [`min_training_size`].
///
/// The fit is seeded from the `"baseline/fit"` sub-seed of `seed`; all
/// other fit settings come from `fit_cfg`.
#[allow(clippy::too_many_arguments)]
pub fn baseline_kriging<E: Evaluator + ?Sized>(
    spec: &UncertaintySpec,
    evaluator: &E,
    n_c: usize,
    fit_cfg: &FitConfig,
    pool: &SampleSet,
    truth: Option<&McsResult>,
    seed: u64,
) -> Result<BaselineOutcome> {
    let start = Instant::now();
    spec.validate()?;
    let dim = spec.dim();
    if evaluator.dim() != dim || pool.dim() != dim {
        return Err(Error::config(format!(
            "uncertainty has {dim} inputs, evaluator {}, pool {}",
            evaluator.dim(),
            pool.dim()
        )));
    }
    let min = min_training_size(dim);
    if n_c < min {
        return Err(Error::config(format!(
            "baseline design needs at least {min} samples, got {n_c}"
        )));
    }
    if pool.is_empty() {
        return Err(Error::config("baseline needs a non-empty pool"));
    }
    let design = baseline_design(spec, n_c, seed)?;
    let rows: Vec<&[f64]> = design.rows().collect();
    let t_ed = Instant::now();
    let batch = evaluate_batch(evaluator, &rows);
    let t_ed = t_ed.elapsed().as_secs_f64();
    let mut x = SampleSet::empty(dim, SampleTag::Initial);
    let mut t = Vec::with_capacity(n_c);
    let mut failures = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        match batch.margins[i] {
            Some(m) => {
                x.push_row(row);
                t.push(m);
            }
            None => failures.push(EvaluationFailure {
                iteration: 0,
                pool_index: None,
                x: row.to_vec(),
                message: batch.errors[i].clone().unwrap_or_default(),
            }),
        }
    }
    let t_sg = Instant::now();
    let model = fit(&x, &t, &fit_cfg.with_seed(sub_seed(seed, "baseline/fit")))?;
    let mean = model.predict(pool).mean;
    let t_sg = t_sg.elapsed().as_secs_f64();
    let timing = Timing {
        t_ed,
        t_sg,
        t_total: start.elapsed().as_secs_f64(),
    };
    let report = PfReport::new(
        Method::Baseline,
        &mean,
        truth,
        n_c,
        n_c,
        0,
        failures.len(),
        None,
        timing,
    )?;
    Ok(BaselineOutcome {
        model,
        report,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::active_learning::FnEvaluator;
    use crate::evaluation::{direct_mcs, FailurePolicy};
    use crate::sampling::mc_sample;

    fn quick_fit() -> FitConfig {
        FitConfig {
            population: 16,
            generations: 15,
            ..FitConfig::default()
        }
    }

    #[test]
    fn linear_1d_boundary_is_learned() {
        let spec = UncertaintySpec::standard_normal(1, 0);
        let ev = FnEvaluator::new(1, |x: &[f64]| 1.5 - x[0]);
        let pool = mc_sample(&spec.with_seed(5), 5000).unwrap();
        let truth = direct_mcs(&ev, &pool, FailurePolicy::Abort).unwrap();
        let out = baseline_kriging(&spec, &ev, 20, &quick_fit(), &pool, Some(&truth), 3).unwrap();
        let c = out.report.confusion.unwrap();
        assert!(truth.n_unstable() > 0);
        assert_eq!((c.tpr, c.fdr), (1.0, 0.0), "{c:?}");
        assert_eq!(out.report.n_total, 20);
        assert_eq!(out.report.enrichment_iterations, 0);
        out.report.check().unwrap();
    }

    #[test]
    fn same_seed_same_report() {
        let spec = UncertaintySpec::standard_normal(2, 0);
        let ev = FnEvaluator::new(2, |x: &[f64]| 2.0 - x[0] - (x[1] * 1.3).sin());
        let pool = mc_sample(&spec.with_seed(8), 3000).unwrap();
        let run = || {
            baseline_kriging(&spec, &ev, 30, &quick_fit(), &pool, None, 41)
                .unwrap()
                .report
                .without_timing()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn design_too_small() {
        let spec = UncertaintySpec::standard_normal(3, 0);
        let ev = FnEvaluator::new(3, |x: &[f64]| x[0]);
        let pool = mc_sample(&spec, 100).unwrap();
        for n_c in [3, 9] {
            let err = baseline_kriging(&spec, &ev, n_c, &quick_fit(), &pool, None, 0).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{err}");
        }
        assert!(baseline_kriging(&spec, &ev, 10, &quick_fit(), &pool, None, 0).is_ok());
    }

    #[test]
    fn failed_design_points_are_skipped() {
        let spec = UncertaintySpec::standard_normal(1, 0);
        let ev = FnEvaluator::new(
            1,
            |x: &[f64]| if x[0] > 1.0 { f64::NAN } else { 2.0 - x[0] },
        );
        let pool = mc_sample(&spec.with_seed(1), 500).unwrap();
        let out = baseline_kriging(&spec, &ev, 25, &quick_fit(), &pool, None, 2).unwrap();
        let design = baseline_design(&spec, 25, 2).unwrap();
        let n_bad = design.rows().filter(|x| x[0] > 1.0).count();
        assert!(n_bad > 0);
        assert_eq!(out.failures.len(), n_bad);
        assert_eq!(out.report.n_failed_evaluations, n_bad);
        assert_eq!(out.model.n_train(), 25 - n_bad);
        assert_eq!(out.report.n_total, 25);
    }
}
