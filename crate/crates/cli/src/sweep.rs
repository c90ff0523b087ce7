//! The `sweep` workflow: repeated `run-al` over one parameter.

use std::path::Path;
use std::str::FromStr;

use ktsa_core::evaluation::PfReport;
use ktsa_core::{Error, Result};

use crate::config::ExperimentConfig;
use crate::output::{ensure_dir, write_csv};
use crate::run::{run_experiment, summarize};

/// Column order of `sweep.csv`.
pub const SWEEP_CSV_HEADER: [&str; 8] = [
    "parameter",
    "value",
    "pf_hat",
    "pf_ref",
    "tpr",
    "fdr",
    "n_total",
    "t_total",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    /// Pool size N_V.
    NV,
    /// Samples added per iteration.
    NE,
    /// Iteration cap.
    LMax,
}

impl SweepParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParameter::NV => "n_v",
            SweepParameter::NE => "n_e",
            SweepParameter::LMax => "l_max",
        }
    }

    fn apply(&self, cfg: &mut ExperimentConfig, value: usize) {
        let al = &mut cfg.active_learning;
        match self {
            SweepParameter::NV => al.n_pool = value,
            SweepParameter::NE => al.n_e = value,
            SweepParameter::LMax => al.l_max = value,
        }
    }
}

impl FromStr for SweepParameter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "n_v" | "n_pool" => Ok(SweepParameter::NV),
            "n_e" => Ok(SweepParameter::NE),
            "l_max" => Ok(SweepParameter::LMax),
            _ => Err(format!(
                "unknown sweep parameter {s:?}; use n_v, n_e or l_max"
            )),
        }
    }
}

/// One row of `sweep.csv`. Scores come from the test set when one is
/// configured, otherwise from the pool.
pub fn sweep_row(parameter: SweepParameter, value: usize, r: &PfReport) -> Vec<String> {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let (pf_ref, tpr, fdr) = match (&r.holdout, &r.confusion) {
        (Some(h), _) => (Some(h.pf_ref), Some(h.confusion.tpr), Some(h.confusion.fdr)),
        (None, Some(c)) => (r.pf_ref, Some(c.tpr), Some(c.fdr)),
        (None, None) => (None, None, None),
    };
    vec![
        parameter.as_str().to_string(),
        value.to_string(),
        r.pf_hat.to_string(),
        opt(pf_ref),
        opt(tpr),
        opt(fdr),
        r.n_total.to_string(),
        format!("{:.3}", r.timing.t_total),
    ]
}

/// Runs the config once per value, each into `out/<parameter>_<value>`,
/// and writes `out/sweep.csv`. Every run uses the config's root seed.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    parameter: SweepParameter,
    values: &[usize],
    out: &Path,
) -> Result<Vec<PfReport>> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    ensure_dir(out)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &v in values {
        let mut c = cfg.clone();
        parameter.apply(&mut c, v);
        let exp = c.resolve(base_dir)?;
        let report = run_experiment(&exp, &out.join(format!("{}_{v}", parameter.as_str())))?.report;
        println!(
            "{} = {v}: {}",
            parameter.as_str(),
            summarize(&report, exp.analytic.as_ref().map(|a| a.pf_ref()))
        );
        rows.push(sweep_row(parameter, v, &report));
        reports.push(report);
        write_csv(&out.join("sweep.csv"), &SWEEP_CSV_HEADER, &rows)?;
    }
    Ok(reports)
}
