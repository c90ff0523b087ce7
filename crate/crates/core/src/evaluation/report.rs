use std::io::Write;

use serde::{Deserialize, Serialize};

use super::holdout::HoldoutScore;
use super::mcs::McsResult;
use super::metrics::{confusion, cov_pf, Confusion};
use crate::active_learning::{estimate_pf, ALOutcome, StopReason, Timing};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Active-learning Kriging.
    ActiveLearning,
    /// One-shot Kriging on a Latin hypercube design.
    Baseline,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ActiveLearning => "active_learning",
            Method::Baseline => "baseline",
        }
    }
}

/// Outcome of one estimation run, scored against reference labels when
/// they are available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfReport {
    pub method: Method,
    /// Surrogate estimate over the pool.
    pub pf_hat: f64,
    /// Coefficient of variation of `pf_hat` read as a Monte Carlo estimate
    /// over the pool; `None` when `pf_hat` is 0 or 1.
    pub cov_pf_hat: Option<f64>,
    pub pf_ref: Option<f64>,
    pub confusion: Option<Confusion>,
    pub n_pool: usize,
    /// Evaluator calls made by the method (initial design included).
    pub n_total: usize,
    /// Evaluator calls made to label the pool.
    pub n_reference: usize,
    pub n_initial: usize,
    /// Batches of enrichment samples evaluated (0 for the baseline).
    pub enrichment_iterations: usize,
    pub n_failed_evaluations: usize,
    pub stop_reason: Option<StopReason>,
    /// Scores on an independent test set, when one was labelled.
    #[serde(default)]
    pub holdout: Option<HoldoutScore>,
    /// Wall-clock times; the only field that differs between repeated runs.
    pub timing: Timing,
}

/// Column order of [`PfReport::write_csv`].
pub const REPORT_CSV_HEADER: [&str; 23] = [
    "method",
    "pf_hat",
    "cov_pf_hat",
    "pf_ref",
    "n_tp",
    "n_fp",
    "n_fn",
    "n_tn",
    "tpr",
    "fdr",
    "tpr_undefined",
    "fdr_undefined",
    "n_pool",
    "n_total",
    "n_reference",
    "n_initial",
    "enrichment_iterations",
    "n_failed_evaluations",
    "stop_reason",
    "holdout_n",
    "holdout_pf_ref",
    "holdout_tpr",
    "holdout_fdr",
];

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl PfReport {
    /// Builds a report from surrogate means over the pool.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        method: Method,
        pool_mean: &[f64],
        truth: Option<&McsResult>,
        n_total: usize,
        n_initial: usize,
        enrichment_iterations: usize,
        n_failed_evaluations: usize,
        stop_reason: Option<StopReason>,
        timing: Timing,
    ) -> Result<Self> {
        let pf_hat = estimate_pf(pool_mean)?;
        let confusion = truth.map(|t| confusion(pool_mean, &t.labels)).transpose()?;
        Ok(PfReport {
            method,
            pf_hat,
            cov_pf_hat: cov_pf(pf_hat, pool_mean.len()).ok(),
            pf_ref: truth.map(|t| t.pf_ref),
            confusion,
            n_pool: pool_mean.len(),
            n_total,
            n_reference: truth.map_or(0, |t| t.n_evaluations),
            n_initial,
            enrichment_iterations,
            n_failed_evaluations,
            stop_reason,
            holdout: None,
            timing,
        })
    }

    pub fn with_holdout(self, holdout: HoldoutScore) -> Self {
        PfReport {
            holdout: Some(holdout),
            ..self
        }
    }

    /// Report of an active-learning run. `n_initial` is the configured
    /// initial design size.
    pub fn from_al(
        outcome: &ALOutcome,
        n_initial: usize,
        truth: Option<&McsResult>,
    ) -> Result<Self> {
        let st = &outcome.state;
        PfReport::new(
            Method::ActiveLearning,
            &st.pool_mean,
            truth,
            st.evaluator_calls,
            n_initial,
            st.enrichment_iterations(),
            st.failures.len(),
            st.stop_reason,
            outcome.timing,
        )
    }

    /// The same report with all timings zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        PfReport {
            timing: Timing::default(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Checks the accounting identities of the report.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invariant(m));
        if let Some(h) = &self.holdout {
            if h.confusion.total() != h.n || h.confusion.predicted_pf() != h.pf_pred {
                return bad("holdout counts disagree with its size or estimate".into());
            }
        }
        if let Some(c) = &self.confusion {
            if c.total() != self.n_pool {
                return bad(format!(
                    "confusion counts sum to {} for a pool of {}",
                    c.total(),
                    self.n_pool
                ));
            }
            if c.predicted_pf() != self.pf_hat {
                return bad("pf_hat differs from the predicted positive fraction".into());
            }
            if Some(c.reference_pf()) != self.pf_ref {
                return bad("pf_ref differs from the reference positive fraction".into());
            }
        }
        Ok(())
    }

    /// One CSV row in [`REPORT_CSV_HEADER`] order (timings excluded).
    pub fn csv_record(&self) -> Vec<String> {
        let c = self.confusion.as_ref();
        vec![
            self.method.as_str().to_string(),
            self.pf_hat.to_string(),
            fmt_opt(self.cov_pf_hat),
            fmt_opt(self.pf_ref),
            fmt_opt(c.map(|c| c.n_tp)),
            fmt_opt(c.map(|c| c.n_fp)),
            fmt_opt(c.map(|c| c.n_fn)),
            fmt_opt(c.map(|c| c.n_tn)),
            fmt_opt(c.map(|c| c.tpr)),
            fmt_opt(c.map(|c| c.fdr)),
            fmt_opt(c.map(|c| c.tpr_undefined)),
            fmt_opt(c.map(|c| c.fdr_undefined)),
            self.n_pool.to_string(),
            self.n_total.to_string(),
            self.n_reference.to_string(),
            self.n_initial.to_string(),
            self.enrichment_iterations.to_string(),
            self.n_failed_evaluations.to_string(),
            fmt_opt(self.stop_reason.map(|s| {
                serde_json::to_value(s)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default()
            })),
            fmt_opt(self.holdout.as_ref().map(|h| h.n)),
            fmt_opt(self.holdout.as_ref().map(|h| h.pf_ref)),
            fmt_opt(self.holdout.as_ref().map(|h| h.confusion.tpr)),
            fmt_opt(self.holdout.as_ref().map(|h| h.confusion.fdr)),
        ]
    }

    /// Writes a header and one row per report.
    pub fn write_csv<W: Write>(reports: &[PfReport], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_CSV_HEADER)?;
        for r in reports {
            w.write_record(r.csv_record())?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::active_learning::{al_pool, run_al, ALConfig, FnEvaluator};
    use crate::evaluation::{direct_mcs, FailurePolicy};
    use crate::kriging::FitConfig;
    use crate::sampling::UncertaintySpec;

    fn small_run() -> (ALOutcome, ALConfig, McsResult) {
        let spec = UncertaintySpec::standard_normal(2, 0);
        let ev = FnEvaluator::new(2, |x: &[f64]| 2.2 - x[0] - 0.5 * x[1]);
        let cfg = ALConfig {
            n_e: 4,
            l_max: 5,
            l_ck: 2,
            n_pool: 3000,
            n_initial: 12,
            seed: 5,
            ..ALConfig::default()
        };
        let fit = FitConfig {
            population: 12,
            generations: 10,
            ..FitConfig::default()
        };
        let out = run_al(&spec, &ev, &cfg, &fit).unwrap();
        let truth = direct_mcs(&ev, &al_pool(&spec, &cfg).unwrap(), FailurePolicy::Abort).unwrap();
        (out, cfg, truth)
    }

    #[test]
    fn al_report_identities() {
        let (out, cfg, truth) = small_run();
        let r = PfReport::from_al(&out, cfg.n_initial, Some(&truth)).unwrap();
        r.check().unwrap();
        assert_eq!(r.n_total, cfg.n_initial + cfg.n_e * r.enrichment_iterations);
        assert_eq!(r.n_reference, cfg.n_pool);
        assert_eq!(r.pf_ref, Some(truth.pf_ref));
        assert_eq!(r.pf_hat, *out.state.pf_history.last().unwrap());
        let c = r.confusion.unwrap();
        assert_eq!(c.reference_pf(), truth.pf_ref);
        assert_eq!(PfReport::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn check_catches_inconsistency() {
        let (out, cfg, truth) = small_run();
        let mut r = PfReport::from_al(&out, cfg.n_initial, Some(&truth)).unwrap();
        r.pf_hat += 0.5;
        assert!(matches!(r.check(), Err(Error::Invariant(_))));
        let mut r = PfReport::from_al(&out, cfg.n_initial, Some(&truth)).unwrap();
        r.n_pool += 1;
        assert!(r.check().is_err());
    }

    #[test]
    fn csv_layout() {
        let r = PfReport::new(
            Method::Baseline,
            &[-1.0, 1.0, 2.0, 3.0],
            None,
            4,
            4,
            0,
            0,
            None,
            Timing::default(),
        )
        .unwrap();
        assert_eq!(r.pf_hat, 0.25);
        assert_eq!(r.confusion, None);
        let mut buf = Vec::new();
        PfReport::write_csv(&[r.clone(), r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], REPORT_CSV_HEADER.join(","));
        assert!(lines[1].starts_with("baseline,0.25,"));
        assert_eq!(lines[1].split(',').count(), REPORT_CSV_HEADER.len());
    }

    #[test]
    fn timing_is_the_only_run_dependent_field() {
        let (a, cfg, truth) = small_run();
        let (b, _, _) = small_run();
        let ra = PfReport::from_al(&a, cfg.n_initial, Some(&truth)).unwrap();
        let rb = PfReport::from_al(&b, cfg.n_initial, Some(&truth)).unwrap();
        assert_eq!(
            ra.without_timing().to_json().unwrap(),
            rb.without_timing().to_json().unwrap()
        );
    }
}
