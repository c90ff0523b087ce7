use serde::{Deserialize, Serialize};

use super::algebra::OrdinarySystem;
use super::model::{validate_training, KrigingModel, Standardization};
use super::optimize::{hybrid_minimize, GaSettings};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::sampling::SampleSet;

/// Settings for the leave-one-out length-scale search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Length-scale bounds in standardized units. Empty means `[0.01, 100]`
    /// for every dimension; a single pair applies to all dimensions.
    pub theta_bounds: Vec<[f64; 2]>,
    pub population: usize,
    pub generations: usize,
    /// GA generations without improvement before moving on to the polish.
    pub stall_generations: usize,
    pub polish_iterations: usize,
    pub nugget: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            theta_bounds: Vec::new(),
            population: 30,
            generations: 50,
            stall_generations: 10,
            polish_iterations: 100,
            nugget: 1e-8,
            seed: 0,
        }
    }
}

const DEFAULT_BOUNDS: [f64; 2] = [1e-2, 1e2];

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        for b in &self.theta_bounds {
            if !(b[0] > 0.0 && b[0] < b[1] && b[1].is_finite()) {
                return Err(Error::config(format!(
                    "theta bounds must satisfy 0 < lo < hi, got {b:?}"
                )));
            }
        }
        if self.population < 4 {
            return Err(Error::config(format!(
                "GA population must be at least 4, got {}",
                self.population
            )));
        }
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return Err(Error::config(format!(
                "nugget must be >= 0, got {}",
                self.nugget
            )));
        }
        Ok(())
    }

    pub fn bounds_for(&self, dim: usize) -> Result<Vec<[f64; 2]>> {
        match self.theta_bounds.len() {
            0 => Ok(vec![DEFAULT_BOUNDS; dim]),
            1 => Ok(vec![self.theta_bounds[0]; dim]),
            k if k == dim => Ok(self.theta_bounds.clone()),
            k => Err(Error::config(format!(
                "{k} theta bounds given for {dim} input dimensions"
            ))),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        FitConfig {
            seed,
            ..self.clone()
        }
    }
}

/// Bookkeeping from one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub loo_objective: f64,
    /// LOO objective of every GA population member evaluated.
    pub population_objectives: Vec<f64>,
    pub evaluations: usize,
    pub generations: usize,
}

/// Smallest training set accepted by [`fit`] for `dim` inputs.
pub fn min_training_size(dim: usize) -> usize {
    (dim + 1).max(10)
}

/// Fits θ by minimizing the leave-one-out squared error, then σ_z² and β̂.
pub fn fit(x: &SampleSet, t: &[f64], cfg: &FitConfig) -> Result<KrigingModel> {
    fit_with_warm_start(x, t, cfg, None).map(|(m, _)| m)
}

/// As [`fit`], seeding the GA population with `warm` length-scales
/// (typically those of the previous active-learning iteration).
pub fn fit_with_warm_start(
    x: &SampleSet,
    t: &[f64],
    cfg: &FitConfig,
    warm: Option<&[f64]>,
) -> Result<(KrigingModel, FitDiagnostics)> {
    cfg.validate()?;
    validate_training(x, t)?;
    let dim = x.dim();
    let min = min_training_size(dim);
    if x.len() < min {
        return Err(Error::Fit(format!(
            "{} training samples, at least {min} required for {dim} inputs",
            x.len()
        )));
    }
    let bounds: Vec<(f64, f64)> = cfg
        .bounds_for(dim)?
        .iter()
        .map(|b| (b[0].log10(), b[1].log10()))
        .collect();

    let standardization = Standardization::from_data(x, t);
    let x_std = standardization.inputs(x);
    let y_std = standardization.outputs(t);

    let objective = |log_theta: &[f64]| -> f64 {
        let theta: Vec<f64> = log_theta.iter().map(|v| 10f64.powf(*v)).collect();
        match OrdinarySystem::new(&x_std, dim, &y_std, &theta, cfg.nugget) {
            Ok(sys) => sys.loo(&y_std).sse(),
            Err(_) => f64::INFINITY,
        }
    };

    let mut seeds = Vec::new();
    if let Some(w) = warm {
        if w.len() == dim && w.iter().all(|v| v.is_finite() && *v > 0.0) {
            seeds.push(w.iter().map(|v| v.log10()).collect());
        }
    }
    let settings = GaSettings {
        population: cfg.population,
        generations: cfg.generations,
        stall_generations: cfg.stall_generations,
        polish_iterations: cfg.polish_iterations,
    };
    let mut rng = rng_from_seed(cfg.seed);
    let result = hybrid_minimize(objective, &bounds, &settings, &seeds, &mut rng);
    if !result.best_value.is_finite() {
        return Err(Error::Fit(
            "no length-scales in the search box give a positive definite correlation matrix".into(),
        ));
    }
    let theta: Vec<f64> = result.best.iter().map(|v| 10f64.powf(*v)).collect();
    let model = KrigingModel::build(x, t, &theta, cfg.nugget)?;
    let diagnostics = FitDiagnostics {
        loo_objective: model.loo_objective(),
        population_objectives: result.population_values,
        evaluations: result.evaluations,
        generations: result.generations,
    };
    Ok((model, diagnostics))
}
