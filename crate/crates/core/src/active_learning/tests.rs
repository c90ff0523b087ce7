use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::*;
use crate::error::{Error, Result};
use crate::kriging::FitConfig;
use crate::sampling::UncertaintySpec;

fn small_cfg() -> ALConfig {
    ALConfig {
        n_e: 5,
        l_max: 6,
        eps_s: 0.02,
        l_ck: 3,
        n_pool: 4000,
        n_initial: 12,
        seed: 11,
    }
}

fn quick_fit() -> FitConfig {
    FitConfig {
        population: 16,
        generations: 15,
        ..FitConfig::default()
    }
}

struct Counting<F> {
    dim: usize,
    f: F,
    calls: AtomicUsize,
}

impl<F: Fn(&[f64]) -> Result<f64> + Sync> Evaluator for Counting<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn margin(&self, x: &[f64]) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.f)(x)
    }
}

#[test]
fn safe_everywhere_runs_to_the_cap() {
    let spec = UncertaintySpec::standard_normal(2, 0);
    let cfg = small_cfg();
    let ev = Counting {
        dim: 2,
        f: |x: &[f64]| Ok(5.0 + x[0] * x[0] + 0.5 * x[1]),
        calls: AtomicUsize::new(0),
    };
    let out = run_al(&spec, &ev, &cfg, &quick_fit()).unwrap();
    assert_eq!(out.state.stop_reason, Some(StopReason::IterationCap));
    assert_eq!(out.state.pf_history, vec![0.0; cfg.l_max]);
    assert_eq!(out.state.evaluator_calls, cfg.max_evaluations());
    assert_eq!(ev.calls.load(Ordering::SeqCst), cfg.max_evaluations());
    assert_eq!(out.state.training_outputs.len(), cfg.max_evaluations());
}

#[test]
fn linear_margin_recovers_pool_fraction() {
    let spec = UncertaintySpec::standard_normal(1, 0);
    let cfg = ALConfig {
        l_max: 10,
        ..small_cfg()
    };
    let pool = al_pool(&spec, &cfg).unwrap();
    let mut xs = pool.column(0);
    xs.sort_by(f64::total_cmp);
    // threshold halfway between the 200th and 201st smallest pool values
    let k = 200;
    let q = 0.5 * (xs[k - 1] + xs[k]);
    let exact = k as f64 / cfg.n_pool as f64;
    let ev = FnEvaluator::new(1, move |x: &[f64]| x[0] - q);
    let out = run_al(&spec, &ev, &cfg, &quick_fit()).unwrap();
    let pf = out.state.pf().unwrap();
    assert!(
        (pf - exact).abs() <= 0.05 * exact,
        "estimate {pf} vs pool fraction {exact}"
    );
}

#[test]
fn runs_are_deterministic() {
    let spec = UncertaintySpec::standard_normal(2, 0);
    let cfg = small_cfg();
    let ev = FnEvaluator::new(2, |x: &[f64]| 2.5 - x[0] - 0.3 * x[1] * x[1]);
    let a = run_al(&spec, &ev, &cfg, &quick_fit()).unwrap();
    let b = run_al(&spec, &ev, &cfg, &quick_fit()).unwrap();
    assert_eq!(a.state, b.state);
    assert_eq!(a.model.to_dump(), b.model.to_dump());
    let c = run_al(&spec, &ev, &ALConfig { seed: 12, ..cfg }, &quick_fit()).unwrap();
    assert_ne!(a.state.pool, c.state.pool);
}

#[test]
fn enrichment_targets_the_boundary_without_repeats() {
    let spec = UncertaintySpec::standard_normal(2, 0);
    let cfg = ALConfig {
        l_max: 8,
        l_ck: 8,
        ..small_cfg()
    };
    let g = |x: &[f64]| 2.0 - x[0] - 0.2 * x[1];
    let ev = FnEvaluator::new(2, g);
    let out = run_al(&spec, &ev, &cfg, &quick_fit()).unwrap();
    let state = &out.state;
    let mut seen = HashSet::new();
    for rec in &state.enrichment_log {
        assert!(rec.pool_indices.len() <= cfg.n_e);
        assert!(rec.u_values.windows(2).all(|w| w[0] <= w[1]));
        for &i in &rec.pool_indices {
            assert!(seen.insert(i), "pool index {i} selected twice");
        }
    }
    assert_eq!(seen.len(), cfg.n_e * (cfg.l_max - 1));
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let selected: Vec<f64> = seen.iter().map(|&i| g(state.pool.row(i)).abs()).collect();
    let all: Vec<f64> = state.pool.rows().map(|x| g(x).abs()).collect();
    assert!(median(selected.clone()) < 0.25 * median(all));
    // enriched rows follow the initial design in the training set
    let first = &state.enrichment_log[0];
    let n0 = cfg.n_initial;
    assert_eq!(
        state.training_inputs.row(n0),
        state.pool.row(first.pool_indices[0])
    );
}

#[test]
fn stops_when_the_estimate_settles() {
    let spec = UncertaintySpec::standard_normal(2, 0);
    let cfg = ALConfig {
        l_max: 30,
        ..small_cfg()
    };
    let ev = FnEvaluator::new(2, |x: &[f64]| 1.5 - x[0] - 0.4 * x[1]);
    let mut summaries = Vec::new();
    let pool = al_pool(&spec, &cfg).unwrap();
    let out = run_al_with(&spec, &ev, &cfg, &quick_fit(), pool, |s| {
        summaries.push(s.clone())
    })
    .unwrap();
    assert_eq!(out.state.stop_reason, Some(StopReason::CriterionMet));
    assert!(out.state.iteration < cfg.l_max);
    assert!(check_stop(&out.state.pf_history, cfg.eps_s, cfg.l_ck));
    assert!(!check_stop(
        &out.state.pf_history[..out.state.iteration - 1],
        cfg.eps_s,
        cfg.l_ck
    ));
    assert_eq!(summaries.len(), out.state.iteration);
    for (l, s) in summaries.iter().enumerate() {
        assert_eq!(s.iteration, l + 1);
        assert_eq!(s.pf, out.state.pf_history[l]);
        assert_eq!(s.n_train, cfg.n_initial + l * cfg.n_e);
    }
    assert_eq!(
        summaries.last().unwrap().stop,
        Some(StopReason::CriterionMet)
    );
    assert!(summaries[..summaries.len() - 1]
        .iter()
        .all(|s| s.stop.is_none()));
    assert!(out.timing.t_total >= out.timing.t_sg);
}

#[test]
fn evaluation_failures_are_logged_and_skipped() {
    let spec = UncertaintySpec::standard_normal(2, 0);
    let cfg = small_cfg();
    let ev = FnEvaluator::new(
        2,
        |x: &[f64]| {
            if x[1] > 1.0 {
                f64::NAN
            } else {
                1.0 - x[0]
            }
        },
    );
    let out = run_al(&spec, &ev, &cfg, &quick_fit()).unwrap();
    let st = &out.state;
    assert!(!st.failures.is_empty());
    assert!(st.failures.iter().all(|f| f.x[1] > 1.0));
    assert!(st.training_inputs.rows().all(|x| x[1] <= 1.0));
    assert_eq!(
        st.training_outputs.len() + st.failures.len(),
        st.evaluator_calls
    );
    for f in &st.failures {
        if let Some(i) = f.pool_index {
            let rec = &st.enrichment_log[f.iteration - 1];
            let k = rec.pool_indices.iter().position(|&j| j == i).unwrap();
            assert!(rec.margins[k].is_none());
        }
    }
}

#[test]
fn evaluator_errors_are_recorded() {
    let spec = UncertaintySpec::standard_normal(1, 0);
    let cfg = small_cfg();
    let ev = Counting {
        dim: 1,
        f: |x: &[f64]| {
            if x[0] > 2.0 {
                Err(Error::Evaluation("diverged".into()))
            } else {
                Ok(2.0 - x[0])
            }
        },
        calls: AtomicUsize::new(0),
    };
    let out = run_al(&spec, &ev, &cfg, &quick_fit()).unwrap();
    assert!(out
        .state
        .failures
        .iter()
        .all(|f| f.message.contains("diverged")));
    assert_eq!(ev.calls.load(Ordering::SeqCst), out.state.evaluator_calls);
}

#[test]
fn constant_margin_never_stops_early() {
    let spec = UncertaintySpec::standard_normal(1, 0);
    let cfg = small_cfg();
    let ev = FnEvaluator::new(1, |_: &[f64]| 3.0);
    let out = run_al(&spec, &ev, &cfg, &quick_fit()).unwrap();
    assert_ne!(out.state.stop_reason, Some(StopReason::CriterionMet));
    assert!(out.state.pf_history.iter().all(|p| *p == 0.0));
    assert!(out.state.pool_mean.iter().all(|m| (m - 3.0).abs() < 1e-9));
}

#[test]
fn pool_of_training_points_reproduces_their_failure_fraction() {
    let spec = UncertaintySpec::standard_normal(2, 3);
    let x = crate::sampling::lhs_sample(&spec, 40).unwrap();
    let t: Vec<f64> = x.rows().map(|r| 0.3 - r[0] * r[1]).collect();
    let model = crate::kriging::fit(&x, &t, &quick_fit()).unwrap();
    let pred = model.predict(&x);
    let n_fail = t.iter().filter(|v| **v < 0.0).count();
    assert!(n_fail > 0);
    assert_eq!(estimate_pf(&pred.mean).unwrap(), n_fail as f64 / 40.0);
}

#[test]
fn bad_setups_abort() {
    let spec = UncertaintySpec::standard_normal(2, 0);
    let ev = FnEvaluator::new(3, |x: &[f64]| x[0]);
    let err = run_al(&spec, &ev, &small_cfg(), &quick_fit()).unwrap_err();
    assert!(matches!(err.error, Error::Config(_)));
    assert_eq!(err.state.iteration, 0);

    let ev = FnEvaluator::new(2, |x: &[f64]| x[0]);
    let cfg = ALConfig {
        n_initial: 5,
        ..small_cfg()
    };
    assert!(matches!(
        run_al(&spec, &ev, &cfg, &quick_fit()).unwrap_err().error,
        Error::Config(_)
    ));
    let cfg = small_cfg();
    let short_pool = al_pool(
        &spec,
        &ALConfig {
            n_pool: 100,
            ..cfg.clone()
        },
    )
    .unwrap();
    assert!(run_al_with(&spec, &ev, &cfg, &quick_fit(), short_pool, |_| {}).is_err());
}

#[test]
fn fit_failure_keeps_partial_state() {
    let spec = UncertaintySpec::standard_normal(1, 0);
    let ev = FnEvaluator::new(1, |x: &[f64]| if x[0] < 0.0 { f64::INFINITY } else { x[0] });
    // half the initial design fails, leaving too few points to fit
    let err = run_al(&spec, &ev, &small_cfg(), &quick_fit()).unwrap_err();
    assert!(
        matches!(err.error, Error::Fit(_) | Error::Config(_)),
        "{err}"
    );
    assert!(!err.state.failures.is_empty());
    assert_eq!(err.state.iteration, 0);
}

#[test]
fn budget_formula() {
    let cfg = ALConfig::default();
    assert_eq!(cfg.max_evaluations(), 50 + 10 * 39);
    assert!(cfg.validate(8).is_ok());
    assert!(ALConfig {
        l_ck: 1,
        ..cfg.clone()
    }
    .validate(2)
    .is_err());
    assert!(ALConfig {
        eps_s: 0.0,
        ..cfg.clone()
    }
    .validate(2)
    .is_err());
    assert!(ALConfig { n_pool: 50, ..cfg }.validate(2).is_err());
}
