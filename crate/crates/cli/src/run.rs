//! The `run-al` workflow: active learning, reference labels, optional
//! baseline, and every artifact of the run.

use std::path::Path;
use std::time::Instant;

use ktsa_core::active_learning::{al_pool, run_al_with, IterationSummary, Timing};
use ktsa_core::evaluation::{
    baseline_kriging, direct_mcs, holdout_set, HoldoutScore, McsResult, PfReport, REPORT_CSV_HEADER,
};
use ktsa_core::sampling::SampleSet;
use ktsa_core::{Error, Result};
use log::info;
use serde::Serialize;

use crate::config::Experiment;
use crate::output::{ensure_dir, write_csv, write_json};

/// Column order of `iterations.csv`.
pub const ITERATION_CSV_HEADER: [&str; 7] = [
    "iteration",
    "n_train",
    "pf",
    "min_u",
    "theta",
    "stop",
    "elapsed",
];

pub struct RunOutcome {
    pub report: PfReport,
    pub baseline: Option<PfReport>,
}

#[derive(Serialize)]
struct TimingRecord {
    active_learning: Timing,
    baseline: Option<Timing>,
    /// Direct Monte Carlo labelling of the pool and test set (s).
    reference: f64,
}

fn iteration_row(s: &IterationSummary) -> Vec<String> {
    let theta: Vec<String> = s.theta.iter().map(|t| t.to_string()).collect();
    let stop = s
        .stop
        .and_then(|r| serde_json::to_value(r).ok())
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    vec![
        s.iteration.to_string(),
        s.n_train.to_string(),
        s.pf.to_string(),
        s.min_u.to_string(),
        theta.join(";"),
        stop,
        format!("{:.3}", s.elapsed),
    ]
}

fn label(exp: &Experiment, samples: &SampleSet) -> Result<McsResult> {
    direct_mcs(exp.evaluator.as_ref(), samples, exp.config.reference.policy)
}

/// Runs the experiment and writes its artifacts to `out`:
///
/// - `config.json`: the config as run;
/// - `report.json`: the active-learning report without timings;
/// - `report.csv`: one row per method;
/// - `baseline_report.json`: when a baseline is configured;
/// - `timing.json`: wall-clock times;
/// - `state.json`, `model.json`: final loop state and surrogate;
/// - `iterations.csv`: one row per iteration;
/// - `reference.json`: direct Monte Carlo labels of the pool.
pub fn run_experiment(exp: &Experiment, out: &Path) -> Result<RunOutcome> {
    let cfg = &exp.config;
    let al = &cfg.active_learning;
    ensure_dir(out)?;
    write_json(&out.join("config.json"), cfg)?;
    let pool = al_pool(&exp.spec, al)?;
    let t_ref = Instant::now();
    let truth = if cfg.reference.pool {
        info!("labelling {} pool samples by direct evaluation", pool.len());
        let t = label(exp, &pool)?;
        write_json(&out.join("reference.json"), &t)?;
        Some(t)
    } else {
        None
    };
    let test = if cfg.reference.n_test > 0 {
        let set = holdout_set(&exp.spec, cfg.reference.n_test, cfg.seed)?;
        info!("labelling {} test samples", set.len());
        let t = label(exp, &set)?;
        Some((set, t))
    } else {
        None
    };
    let t_ref = t_ref.elapsed().as_secs_f64();

    let mut log = Vec::new();
    let result = run_al_with(
        &exp.spec,
        exp.evaluator.as_ref(),
        al,
        &cfg.fit,
        pool.clone(),
        |s| {
            info!(
                "iteration {:>3}: n = {:>4}, pf = {:.6}, min U = {:.3}{}",
                s.iteration,
                s.n_train,
                s.pf,
                s.min_u,
                s.stop.map(|r| format!(", stop: {r:?}")).unwrap_or_default()
            );
            log.push(iteration_row(s));
        },
    );
    write_csv(&out.join("iterations.csv"), &ITERATION_CSV_HEADER, &log)?;
    let outcome = match result {
        Ok(o) => o,
        Err(abort) => {
            write_json(&out.join("state.json"), &abort.state)?;
            return Err(abort.error);
        }
    };
    write_json(&out.join("state.json"), &outcome.state)?;
    write_json(&out.join("model.json"), &outcome.model)?;

    let mut report = PfReport::from_al(&outcome, al.n_initial, truth.as_ref())?;
    if let Some((set, t)) = &test {
        report = report.with_holdout(HoldoutScore::new(&outcome.model, set, t)?);
    }
    check_report(&report, al.n_initial, al.n_e)?;

    let baseline = match cfg.baseline {
        Some(b) => {
            info!("baseline: {} design points", b.n_c);
            let run = baseline_kriging(
                &exp.spec,
                exp.evaluator.as_ref(),
                b.n_c,
                &cfg.fit,
                &pool,
                truth.as_ref(),
                cfg.seed,
            )?;
            let mut r = run.report;
            if let Some((set, t)) = &test {
                r = r.with_holdout(HoldoutScore::new(&run.model, set, t)?);
            }
            r.check()?;
            write_json(&out.join("baseline_report.json"), &r.without_timing())?;
            Some(r)
        }
        None => None,
    };

    write_json(&out.join("report.json"), &report.without_timing())?;
    write_json(
        &out.join("timing.json"),
        &TimingRecord {
            active_learning: report.timing,
            baseline: baseline.as_ref().map(|b| b.timing),
            reference: t_ref,
        },
    )?;
    let rows: Vec<Vec<String>> = std::iter::once(&report)
        .chain(baseline.as_ref())
        .map(|r| r.csv_record())
        .collect();
    write_csv(&out.join("report.csv"), &REPORT_CSV_HEADER, &rows)?;
    Ok(RunOutcome { report, baseline })
}

/// Accounting identities every active-learning report must satisfy.
fn check_report(r: &PfReport, n_initial: usize, n_e: usize) -> Result<()> {
    r.check()?;
    let expected = n_initial + n_e * r.enrichment_iterations;
    if r.n_total != expected {
        return Err(Error::Invariant(format!(
            "{} evaluator calls, but N0 + n_e * iterations = {expected}",
            r.n_total
        )));
    }
    Ok(())
}

/// Human-readable summary of a report.
pub fn summarize(r: &PfReport, pf_exact: Option<f64>) -> String {
    let mut s = format!("{}: pf_hat = {:.6}", r.method.as_str(), r.pf_hat);
    if let Some(p) = r.pf_ref {
        s += &format!(", pf_ref (pool) = {p:.6}");
    }
    if let Some(p) = pf_exact {
        s += &format!(
            ", pf (benchmark) = {p:.6}, relative error = {:.2}%",
            100.0 * (r.pf_hat - p).abs() / p
        );
    }
    if let Some(c) = &r.confusion {
        s += &format!(", TPR = {:.4}, FDR = {:.4}", c.tpr, c.fdr);
    }
    if let Some(h) = &r.holdout {
        s += &format!(
            ", test set ({}): TPR = {:.4}, FDR = {:.4}",
            h.n, h.confusion.tpr, h.confusion.fdr
        );
    }
    s += &format!(", N_total = {}", r.n_total);
    if let Some(stop) = r.stop_reason {
        s += &format!(
            " after {} enrichment iterations ({stop:?})",
            r.enrichment_iterations
        );
    }
    s
}
