use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluator::Evaluator;
use super::learning::{check_stop, estimate_pf, select_enrichment, u_value};
use super::state::{ALConfig, ALState, EnrichmentRecord, EvaluationFailure, StopReason};
use crate::error::{Error, Result};
use crate::kriging::{fit_with_warm_start, FitConfig, KrigingModel};
use crate::rng::sub_seed;
use crate::sampling::{lhs_sample, mc_sample, SampleSet, SampleTag, UncertaintySpec};

/// Wall-clock split of a run, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    /// Time spent inside the expensive evaluator.
    pub t_ed: f64,
    /// Time spent fitting surrogates and predicting over the pool.
    pub t_sg: f64,
    pub t_total: f64,
}

/// Progress of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub n_train: usize,
    pub pf: f64,
    /// Smallest U over pool candidates not yet enriched.
    pub min_u: f64,
    pub theta: Vec<f64>,
    pub elapsed: f64,
    pub stop: Option<StopReason>,
}

#[derive(Debug, Clone)]
pub struct ALOutcome {
    /// Surrogate of the last iteration.
    pub model: KrigingModel,
    pub state: ALState,
    pub timing: Timing,
}

/// A run that could not finish, with the state reached so far.
#[derive(Debug)]
pub struct ALAbort {
    pub error: Error,
    pub state: Box<ALState>,
}

impl fmt::Display for ALAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "active learning aborted at iteration {}: {}",
            self.state.iteration, self.error
        )
    }
}

impl std::error::Error for ALAbort {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Candidate pool drawn for `cfg`: `n_pool` Monte Carlo samples seeded from
/// the `"pool"` sub-seed of `cfg.seed`.
pub fn al_pool(spec: &UncertaintySpec, cfg: &ALConfig) -> Result<SampleSet> {
    mc_sample(&spec.with_seed(sub_seed(cfg.seed, "pool")), cfg.n_pool)
}

/// Initial Latin hypercube design seeded from the `"initial"` sub-seed.
pub fn al_initial_design(spec: &UncertaintySpec, cfg: &ALConfig) -> Result<SampleSet> {
    lhs_sample(
        &spec.with_seed(sub_seed(cfg.seed, "initial")),
        cfg.n_initial,
    )
}

/// Fit configuration used at iteration `l`: the seed is derived from
/// `cfg.seed`, everything else comes from `fit`.
pub fn iteration_fit_config(fit: &FitConfig, cfg: &ALConfig, l: usize) -> FitConfig {
    fit.with_seed(sub_seed(cfg.seed, &format!("fit/{l}")))
}

/// Runs the enrichment loop on the pool [`al_pool`] draws for `cfg`.
pub fn run_al<E: Evaluator + ?Sized>(
    spec: &UncertaintySpec,
    evaluator: &E,
    cfg: &ALConfig,
    fit: &FitConfig,
) -> std::result::Result<ALOutcome, ALAbort> {
    let empty = || empty_state(spec.dim());
    let pool = al_pool(spec, cfg).map_err(|error| ALAbort {
        error,
        state: Box::new(empty()),
    })?;
    run_al_with(spec, evaluator, cfg, fit, pool, |_| {})
}

fn empty_state(dim: usize) -> ALState {
    ALState {
        iteration: 0,
        training_inputs: SampleSet::empty(dim, SampleTag::Initial),
        training_outputs: Vec::new(),
        pool: SampleSet::empty(dim, SampleTag::Pool),
        pool_mean: Vec::new(),
        pool_std: Vec::new(),
        pf_history: Vec::new(),
        theta_history: Vec::new(),
        enrichment_log: Vec::new(),
        failures: Vec::new(),
        evaluator_calls: 0,
        stop_reason: None,
    }
}

pub(crate) struct Batch {
    pub margins: Vec<Option<f64>>,
    pub errors: Vec<Option<String>>,
}

/// Margins of `rows` in order; errors and non-finite values become `None`
/// with a message.
pub(crate) fn evaluate_batch<E: Evaluator + ?Sized>(evaluator: &E, rows: &[&[f64]]) -> Batch {
    let results: Vec<Result<f64>> = rows.par_iter().map(|x| evaluator.margin(x)).collect();
    let mut margins = Vec::with_capacity(rows.len());
    let mut errors = Vec::with_capacity(rows.len());
    for r in results {
        match r {
            Ok(m) if m.is_finite() => {
                margins.push(Some(m));
                errors.push(None);
            }
            Ok(m) => {
                margins.push(None);
                errors.push(Some(format!("evaluator returned non-finite margin {m}")));
            }
            Err(e) => {
                margins.push(None);
                errors.push(Some(e.to_string()));
            }
        }
    }
    Batch { margins, errors }
}

/// Runs the enrichment loop over a caller-supplied pool, reporting each
/// iteration to `observer`.
///
/// Per iteration: fit the surrogate on the current training set, predict
/// over the pool, record the estimate, test the stopping rule, and unless
/// stopping (or at `l_max`) evaluate the `n_e` pool samples with the
/// smallest U and add them to the training set. Samples the evaluator
/// fails on are logged and left out of training.
pub fn run_al_with<E, O>(
    spec: &UncertaintySpec,
    evaluator: &E,
    cfg: &ALConfig,
    fit: &FitConfig,
    pool: SampleSet,
    mut observer: O,
) -> std::result::Result<ALOutcome, ALAbort>
where
    E: Evaluator + ?Sized,
    O: FnMut(&IterationSummary),
{
    let start = Instant::now();
    let dim = spec.dim();
    let mut state = empty_state(dim);
    let abort = |error: Error, state: &ALState| ALAbort {
        error,
        state: Box::new(state.clone()),
    };
    let checks = spec
        .validate()
        .and_then(|_| cfg.validate(dim))
        .and_then(|_| fit.validate())
        .and_then(|_| {
            if evaluator.dim() != dim {
                Err(Error::config(format!(
                    "evaluator takes {} inputs, uncertainty spec has {dim}",
                    evaluator.dim()
                )))
            } else if pool.dim() != dim || pool.len() != cfg.n_pool {
                Err(Error::config(format!(
                    "pool is {} x {}, expected {} x {dim}",
                    pool.len(),
                    pool.dim(),
                    cfg.n_pool
                )))
            } else {
                Ok(())
            }
        });
    if let Err(e) = checks {
        return Err(abort(e, &state));
    }
    state.pool = pool;
    let mut timing = Timing::default();

    let initial = al_initial_design(spec, cfg).map_err(|e| abort(e, &state))?;
    let rows: Vec<&[f64]> = initial.rows().collect();
    let t = Instant::now();
    let batch = evaluate_batch(evaluator, &rows);
    timing.t_ed += t.elapsed().as_secs_f64();
    state.evaluator_calls += rows.len();
    let mut train_rows: Vec<Vec<f64>> = Vec::new();
    for ((x, m), err) in rows.iter().zip(&batch.margins).zip(&batch.errors) {
        match (m, err) {
            (Some(m), _) => {
                train_rows.push(x.to_vec());
                state.training_outputs.push(*m);
            }
            (None, Some(msg)) => state.failures.push(EvaluationFailure {
                iteration: 0,
                pool_index: None,
                x: x.to_vec(),
                message: msg.clone(),
            }),
            (None, None) => unreachable!(),
        }
    }
    state.training_inputs =
        SampleSet::from_rows(dim, &train_rows, SampleTag::Initial).map_err(|e| abort(e, &state))?;

    let mut enriched = vec![false; state.pool.len()];
    let mut warm: Option<Vec<f64>> = None;
    let mut model: Option<KrigingModel> = None;
    for l in 1..=cfg.l_max {
        let t = Instant::now();
        let fit_cfg = iteration_fit_config(fit, cfg, l);
        let fitted = fit_with_warm_start(
            &state.training_inputs,
            &state.training_outputs,
            &fit_cfg,
            warm.as_deref(),
        );
        let (m, _) = match fitted {
            Ok(v) => v,
            Err(e) => return Err(abort(e, &state)),
        };
        let pred = m.predict(&state.pool);
        timing.t_sg += t.elapsed().as_secs_f64();
        state.pool_std = pred.std().collect();
        state.pool_mean = pred.mean;
        warm = Some(m.theta().to_vec());
        state.theta_history.push(m.theta().to_vec());
        let pf = estimate_pf(&state.pool_mean).map_err(|e| abort(e, &state))?;
        state.pf_history.push(pf);
        state.iteration = l;
        model = Some(m);

        let u: Vec<f64> = state
            .pool_mean
            .iter()
            .zip(&state.pool_std)
            .map(|(mu, s)| u_value(*mu, *s))
            .collect();
        let min_u = u
            .iter()
            .zip(&enriched)
            .filter(|(_, e)| !**e)
            .map(|(u, _)| *u)
            .fold(f64::INFINITY, f64::min);

        let mut stop = None;
        let mut selected = Vec::new();
        if check_stop(&state.pf_history, cfg.eps_s, cfg.l_ck) {
            stop = Some(StopReason::CriterionMet);
        } else if l == cfg.l_max {
            stop = Some(StopReason::IterationCap);
        } else {
            selected = select_enrichment(&u, &enriched, cfg.n_e).map_err(|e| abort(e, &state))?;
            if selected.is_empty() {
                stop = Some(StopReason::EvaluatorExhausted);
            }
        }
        observer(&IterationSummary {
            iteration: l,
            n_train: state.training_outputs.len(),
            pf,
            min_u,
            theta: state.theta_history[l - 1].clone(),
            elapsed: start.elapsed().as_secs_f64(),
            stop,
        });
        if stop.is_some() {
            state.stop_reason = stop;
            break;
        }

        let rows: Vec<&[f64]> = selected.iter().map(|&i| state.pool.row(i)).collect();
        let t = Instant::now();
        let batch = evaluate_batch(evaluator, &rows);
        timing.t_ed += t.elapsed().as_secs_f64();
        state.evaluator_calls += rows.len();
        for (k, &i) in selected.iter().enumerate() {
            enriched[i] = true;
            match batch.margins[k] {
                Some(m) => {
                    state.training_inputs.push_row(state.pool.row(i));
                    state.training_outputs.push(m);
                }
                None => state.failures.push(EvaluationFailure {
                    iteration: l,
                    pool_index: Some(i),
                    x: state.pool.row(i).to_vec(),
                    message: batch.errors[k].clone().unwrap_or_default(),
                }),
            }
        }
        state.enrichment_log.push(EnrichmentRecord {
            iteration: l,
            u_values: selected.iter().map(|&i| u[i]).collect(),
            predicted_means: selected.iter().map(|&i| state.pool_mean[i]).collect(),
            pool_indices: selected,
            margins: batch.margins,
        });
    }
    state.check(cfg).map_err(|e| abort(e, &state))?;
    timing.t_total = start.elapsed().as_secs_f64();
    let model = model.expect("at least one iteration runs");
    Ok(ALOutcome {
        model,
        state,
        timing,
    })
}
