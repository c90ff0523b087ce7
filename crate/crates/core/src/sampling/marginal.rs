use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile, `u` in (0, 1).
pub fn norm_ppf(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// Marginal distribution of one uncertain input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalSpec {
    /// Normal distribution; for loads the values are multiples of base power.
    Gaussian { mean: f64, std: f64 },
    /// Two-parameter Weibull, typically wind speed in m/s.
    Weibull { scale: f64, shape: f64 },
    /// Resampling distribution over observed values (sorted ascending).
    Empirical {
        values: Vec<f64>,
        #[serde(default)]
        units: String,
    },
}

impl MarginalSpec {
    pub fn gaussian(mean: f64, std: f64) -> Self {
        MarginalSpec::Gaussian { mean, std }
    }

    pub fn standard_normal() -> Self {
        MarginalSpec::Gaussian {
            mean: 0.0,
            std: 1.0,
        }
    }

    pub fn weibull(scale: f64, shape: f64) -> Self {
        MarginalSpec::Weibull { scale, shape }
    }

    /// Builds an empirical marginal; the values are sorted here.
    pub fn empirical(mut values: Vec<f64>, units: impl Into<String>) -> Self {
        values.sort_by(f64::total_cmp);
        MarginalSpec::Empirical {
            values,
            units: units.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MarginalSpec::Gaussian { mean, std } => {
                if !mean.is_finite() || !std.is_finite() || *std <= 0.0 {
                    return Err(Error::config(format!(
                        "gaussian marginal needs finite mean and std > 0 (got mean={mean}, std={std})"
                    )));
                }
            }
            MarginalSpec::Weibull { scale, shape } => {
                if !(scale.is_finite() && *scale > 0.0 && shape.is_finite() && *shape > 0.0) {
                    return Err(Error::config(format!(
                        "weibull marginal needs scale > 0 and shape > 0 (got scale={scale}, shape={shape})"
                    )));
                }
            }
            MarginalSpec::Empirical { values, .. } => {
                if values.is_empty() {
                    return Err(Error::config("empirical marginal has no values"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config(
                        "empirical marginal contains non-finite values",
                    ));
                }
                if values.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::config(
                        "empirical marginal values must be sorted ascending",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Inverse CDF at `u` in (0, 1). The empirical quantile is the type-1
    /// step function, so a uniform `u` selects each stored value with
    /// probability 1/n.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            MarginalSpec::Gaussian { mean, std } => mean + std * norm_ppf(u),
            MarginalSpec::Weibull { scale, shape } => scale * (-(-u).ln_1p()).powf(1.0 / shape),
            MarginalSpec::Empirical { values, .. } => {
                let n = values.len();
                let idx = ((u * n as f64).ceil() as usize).clamp(1, n) - 1;
                values[idx]
            }
        }
    }

    /// Maps a standard-normal score through the copula to this marginal.
    /// Equivalent to `quantile(norm_cdf(z))` but keeps tail accuracy.
    pub fn from_normal_score(&self, z: f64) -> f64 {
        match self {
            MarginalSpec::Gaussian { mean, std } => mean + std * z,
            MarginalSpec::Weibull { scale, shape } => {
                // survival probability computed directly to avoid 1 - u rounding to 0
                let s = norm_cdf(-z);
                scale * (-s.ln()).powf(1.0 / shape)
            }
            MarginalSpec::Empirical { .. } => self.quantile(norm_cdf(z)),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            MarginalSpec::Gaussian { mean, std } => norm_cdf((x - mean) / std),
            MarginalSpec::Weibull { scale, shape } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / scale).powf(*shape)).exp_m1()
                }
            }
            MarginalSpec::Empirical { values, .. } => {
                let count = values.partition_point(|v| *v <= x);
                count as f64 / values.len() as f64
            }
        }
    }
}

/// Reads a named numeric column from a CSV file (header row required) and
/// returns an empirical marginal over its values.
pub fn load_empirical(path: impl AsRef<Path>, column: &str) -> Result<MarginalSpec> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| {
            Error::config(format!("column '{column}' not found in {}", path.display()))
        })?;
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = record.get(col).unwrap_or("").trim();
        let v: f64 = field.parse().map_err(|_| {
            Error::config(format!(
                "non-numeric value '{field}' in column '{column}' at data row {}",
                row + 1
            ))
        })?;
        if !v.is_finite() {
            return Err(Error::config(format!(
                "non-finite value in column '{column}' at data row {}",
                row + 1
            )));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::config(format!("column '{column}' is empty")));
    }
    Ok(MarginalSpec::empirical(values, column))
}
