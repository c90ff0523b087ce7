//! Experiment configuration files.
//!
//! A config is a JSON object with a `schema_version` field (currently 1).
//! One root `seed` drives every random stream: the pool, initial design and
//! per-iteration fits of active learning, the baseline design and fit, and
//! the optional test set all use named sub-seeds of it.

use std::path::{Path, PathBuf};

use ktsa_core::active_learning::{ALConfig, Evaluator};
use ktsa_core::evaluation::{analytic_case, AnalyticLimitState, FailurePolicy};
use ktsa_core::kriging::{min_training_size, FitConfig};
use ktsa_core::powersim::{CctSearch, Contingency, GridCase, GridEvaluator};
use ktsa_core::sampling::{MarginalSpec, UncertaintySpec};
use ktsa_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub evaluator: EvaluatorConfig,
    /// Input distribution; defaults to standard normals for analytic
    /// benchmarks and to the built-in model for built-in grid cases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintySpec>,
    #[serde(default)]
    pub active_learning: ALConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineConfig>,
    #[serde(default)]
    pub reference: ReferenceConfig,
    /// Where outputs go when `--out` is not given, relative to the config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvaluatorConfig {
    /// One of the shipped analytic benchmarks.
    Analytic { name: String },
    /// The transient stability margin of a grid case.
    Grid {
        case: CaseSource,
        /// Defaults to the reference contingency of a built-in case.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        contingency: Option<Contingency>,
        #[serde(default)]
        search: CctSearch,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseSource {
    /// `"smib"` or `"wscc9"`.
    Builtin(String),
    /// Grid case JSON file, relative to the config file.
    Path(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    /// Latin hypercube design size N_c.
    pub n_c: usize,
}

/// Direct Monte Carlo labelling used to score the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Label the whole pool by direct evaluation.
    pub pool: bool,
    /// Size of an extra independent test set; 0 disables it.
    pub n_test: usize,
    pub policy: FailurePolicy,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            pool: true,
            n_test: 0,
            policy: FailurePolicy::Abort,
        }
    }
}

/// A validated config with its evaluator built.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub spec: UncertaintySpec,
    pub evaluator: Box<dyn Evaluator>,
    pub analytic: Option<AnalyticLimitState>,
}

impl ExperimentConfig {
    /// Parses a config; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." {
                "config".to_string()
            } else {
                path
            };
            Error::config(format!("{path}: {}", e.inner()))
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    #[cfg(test)]
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Replaces the root seed and pushes it into the nested sections.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.active_learning.seed = seed;
        self
    }

    /// Checks the config and builds its evaluator. Relative paths resolve
    /// against `base_dir`.
    pub fn resolve(mut self, base_dir: &Path) -> Result<Experiment> {
        if self.active_learning.seed != 0 && self.active_learning.seed != self.seed {
            return Err(Error::config(
                "active_learning.seed: set the root seed instead; nested seeds are derived from it",
            ));
        }
        if self.fit.seed != 0 {
            return Err(Error::config(
                "fit.seed: set the root seed instead; fit seeds are derived from it",
            ));
        }
        self.active_learning.seed = self.seed;
        let (evaluator, analytic, default_spec): (Box<dyn Evaluator>, _, _) =
            match &self.evaluator {
                EvaluatorConfig::Analytic { name } => {
                    let case = analytic_case(name)
                        .map_err(|e| Error::config(format!("evaluator.name: {e}")))?;
                    if self.uncertainty.is_some() {
                        return Err(Error::config(
                        "uncertainty: analytic benchmarks are defined on standard-normal inputs",
                    ));
                    }
                    let spec = case.uncertainty(self.seed);
                    (Box::new(case.clone()), Some(case), Some(spec))
                }
                EvaluatorConfig::Grid {
                    case,
                    contingency,
                    search,
                } => {
                    let (grid, builtin) = load_case(case, base_dir)?;
                    let ctg = match (contingency, builtin) {
                        (Some(c), _) => c.clone(),
                        (None, Some(name)) => builtin_contingency(name),
                        (None, None) => return Err(Error::config(
                            "evaluator.contingency: required for a grid case loaded from a file",
                        )),
                    };
                    let default_spec = builtin.and_then(|n| builtin_uncertainty(n, self.seed));
                    let ev = GridEvaluator::new(grid, ctg, *search)?;
                    (Box::new(ev), None, default_spec)
                }
            };
        let spec = match (&self.uncertainty, default_spec) {
            (Some(s), _) => s.with_seed(self.seed),
            (None, Some(s)) => s,
            (None, None) => return Err(Error::config("uncertainty: required for this evaluator")),
        };
        spec.validate()
            .map_err(|e| Error::config(format!("uncertainty: {e}")))?;
        let dim = spec.dim();
        if evaluator.dim() != dim {
            return Err(Error::config(format!(
                "uncertainty: {dim} inputs, but the evaluator takes {}",
                evaluator.dim()
            )));
        }
        self.active_learning
            .validate(dim)
            .map_err(|e| Error::config(format!("active_learning: {e}")))?;
        self.fit
            .validate()
            .map_err(|e| Error::config(format!("fit: {e}")))?;
        if let Some(b) = &self.baseline {
            let min = min_training_size(dim);
            if b.n_c < min {
                return Err(Error::config(format!(
                    "baseline.n_c: at least {min} samples required, got {}",
                    b.n_c
                )));
            }
        }
        Ok(Experiment {
            config: self,
            spec,
            evaluator,
            analytic,
        })
    }
}

/// Built-in grid case names.
pub const BUILTIN_CASES: [&str; 2] = ["smib", "wscc9"];

pub fn builtin_case(name: &str) -> Result<GridCase> {
    match name {
        "smib" => Ok(GridCase::smib()),
        "wscc9" => Ok(GridCase::wscc9()),
        _ => Err(Error::config(format!(
            "unknown built-in grid case {name:?}; available: {}",
            BUILTIN_CASES.join(", ")
        ))),
    }
}

pub fn builtin_contingency(name: &str) -> Contingency {
    match name {
        "smib" => GridCase::smib_contingency(),
        _ => GridCase::wscc9_contingency(),
    }
}

/// Input model of a built-in case; `None` when the case has no inputs.
pub fn builtin_uncertainty(name: &str, seed: u64) -> Option<UncertaintySpec> {
    (name == "wscc9").then(|| GridCase::wscc9_uncertainty(seed))
}

/// Loads a grid case; the second value is the built-in name, if any.
pub fn load_case<'a>(
    source: &'a CaseSource,
    base_dir: &Path,
) -> Result<(GridCase, Option<&'a str>)> {
    match source {
        CaseSource::Builtin(name) => Ok((builtin_case(name)?, Some(name.as_str()))),
        CaseSource::Path(p) => {
            let path = base_dir.join(p);
            if !path.exists() {
                return Err(Error::config(format!(
                    "evaluator.case: grid case file {} does not exist",
                    path.display()
                )));
            }
            Ok((GridCase::load(&path)?, None))
        }
    }
}

/// Medians of every marginal: the nominal operating point.
pub fn nominal_point(spec: &UncertaintySpec) -> Vec<f64> {
    spec.dims
        .iter()
        .map(|m: &MarginalSpec| m.quantile(0.5))
        .collect()
}
