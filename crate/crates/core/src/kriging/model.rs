use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::algebra::OrdinarySystem;
use super::kernel::matern52_distance;
use crate::error::{Error, Result};
use crate::sampling::SampleSet;

/// Per-dimension affine maps to zero mean / unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub output_shift: f64,
    pub output_scale: f64,
}

fn mean_and_scale(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    // constant columns keep unit scale
    let scale = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
    (mean, scale)
}

impl Standardization {
    pub fn from_data(x: &SampleSet, t: &[f64]) -> Self {
        let (input_shift, input_scale) = (0..x.dim())
            .map(|j| mean_and_scale(x.column(j).into_iter()))
            .unzip();
        let (output_shift, output_scale) = mean_and_scale(t.iter().copied());
        Standardization {
            input_shift,
            input_scale,
            output_shift,
            output_scale,
        }
    }

    pub fn input(&self, x: &[f64], out: &mut [f64]) {
        for (j, v) in x.iter().enumerate() {
            out[j] = (v - self.input_shift[j]) / self.input_scale[j];
        }
    }

    pub fn inputs(&self, x: &SampleSet) -> Vec<f64> {
        let m = x.dim();
        let mut out = vec![0.0; x.len() * m];
        for (i, row) in x.rows().enumerate() {
            self.input(row, &mut out[i * m..(i + 1) * m]);
        }
        out
    }

    pub fn outputs(&self, t: &[f64]) -> Vec<f64> {
        t.iter()
            .map(|v| (v - self.output_shift) / self.output_scale)
            .collect()
    }
}

/// Fitted ordinary-Kriging surrogate.
///
/// All internal quantities (θ, σ_z², β) live on the standardized scale;
/// [`KrigingModel::predict`] and the accessors return physical units.
#[derive(Debug, Clone)]
pub struct KrigingModel {
    x_train: SampleSet,
    t_train: Vec<f64>,
    standardization: Standardization,
    /// Standardized training inputs divided by θ, row-major.
    x_scaled: Vec<f64>,
    theta: Vec<f64>,
    sigma2: f64,
    loo_sse: f64,
    system: OrdinarySystem,
}

/// Smallest process variance kept on the standardized scale.
const SIGMA2_FLOOR: f64 = 1e-12;

const PREDICT_CHUNK: usize = 1024;

/// Pointwise predictions over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl Predictions {
    pub fn std(&self) -> impl Iterator<Item = f64> + '_ {
        self.variance.iter().map(|v| v.sqrt())
    }
}

impl KrigingModel {
    /// Builds the model at fixed length-scales `theta` (standardized units).
    ///
    /// β̂ is the generalized least-squares trend and σ_z² comes from the
    /// normalized leave-one-out residuals. Needs at least two samples.
    pub fn build(x: &SampleSet, t: &[f64], theta: &[f64], nugget: f64) -> Result<Self> {
        validate_training(x, t)?;
        if x.len() < 2 {
            return Err(Error::Fit(
                "at least two training samples are required".into(),
            ));
        }
        if theta.len() != x.dim() || theta.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Fit(format!(
                "need {} positive length-scales, got {theta:?}",
                x.dim()
            )));
        }
        let standardization = Standardization::from_data(x, t);
        let x_std = standardization.inputs(x);
        let y_std = standardization.outputs(t);
        let system = OrdinarySystem::new(&x_std, x.dim(), &y_std, theta, nugget)?;
        let loo = system.loo(&y_std);
        let sigma2 = loo.process_variance();
        let sigma2 = if sigma2.is_finite() {
            sigma2.max(SIGMA2_FLOOR)
        } else {
            return Err(Error::Fit("process variance estimate is not finite".into()));
        };
        Ok(KrigingModel {
            x_train: x.clone(),
            t_train: t.to_vec(),
            standardization,
            x_scaled: scale_rows(&x_std, theta),
            theta: theta.to_vec(),
            sigma2,
            loo_sse: loo.sse(),
            system,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_train.dim()
    }

    pub fn n_train(&self) -> usize {
        self.t_train.len()
    }

    pub fn training_inputs(&self) -> &SampleSet {
        &self.x_train
    }

    pub fn training_outputs(&self) -> &[f64] {
        &self.t_train
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    /// Length-scales on the standardized input scale.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Process variance in output units squared.
    pub fn process_variance(&self) -> f64 {
        self.sigma2 * self.standardization.output_scale.powi(2)
    }

    /// Constant trend in output units.
    pub fn beta(&self) -> f64 {
        self.system.beta * self.standardization.output_scale + self.standardization.output_shift
    }

    pub fn nugget(&self) -> f64 {
        self.system.nugget
    }

    /// Leave-one-out sum of squared residuals on the standardized scale.
    pub fn loo_objective(&self) -> f64 {
        self.loo_sse
    }

    pub fn predict_mean(&self, x0: &[f64]) -> f64 {
        self.predict_rows(&[x0]).mean[0]
    }

    pub fn predict_variance(&self, x0: &[f64]) -> f64 {
        self.predict_rows(&[x0]).variance[0]
    }

    /// Mean and variance at every row of `points`.
    pub fn predict(&self, points: &SampleSet) -> Predictions {
        assert_eq!(points.dim(), self.dim(), "prediction dimension mismatch");
        let m = self.dim();
        let chunks: Vec<(Vec<f64>, Vec<f64>)> = points
            .as_flat()
            .par_chunks(PREDICT_CHUNK * m)
            .map(|chunk| {
                let rows: Vec<&[f64]> = chunk.chunks_exact(m).collect();
                let p = self.predict_rows(&rows);
                (p.mean, p.variance)
            })
            .collect();
        let mut mean = Vec::with_capacity(points.len());
        let mut variance = Vec::with_capacity(points.len());
        for (a, b) in chunks {
            mean.extend(a);
            variance.extend(b);
        }
        Predictions { mean, variance }
    }

    fn predict_rows(&self, rows: &[&[f64]]) -> Predictions {
        let m = self.dim();
        let n = self.n_train();
        let c = rows.len();
        let mut z = vec![0.0; m];
        // cross-correlations, one column per query point
        let mut r = DMatrix::<f64>::zeros(n, c);
        for (k, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), m, "prediction dimension mismatch");
            self.standardization.input(row, &mut z);
            for (zj, t) in z.iter_mut().zip(&self.theta) {
                *zj /= t;
            }
            for (i, xi) in self.x_scaled.chunks_exact(m).enumerate() {
                let d2: f64 = z.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum();
                // the nugget belongs to the zero-distance correlation, which
                // keeps the predictor interpolating at training inputs
                r[(i, k)] = if d2 == 0.0 {
                    1.0 + self.system.nugget
                } else {
                    matern52_distance(d2.sqrt())
                };
            }
        }
        let sys = &self.system;
        let scale = self.standardization.output_scale;
        let shift = self.standardization.output_shift;
        let trend: Vec<(f64, f64)> = (0..c)
            .map(|k| {
                let rk = r.column(k);
                (sys.beta + rk.dot(&sys.alpha), 1.0 - rk.dot(&sys.rinv_one))
            })
            .collect();
        sys.solve_lower(&mut r);
        let mut mean = Vec::with_capacity(c);
        let mut variance = Vec::with_capacity(c);
        for (k, (mu, u)) in trend.into_iter().enumerate() {
            let s = r.column(k).norm_squared();
            let var = (self.sigma2 * (1.0 - s + u * u / sys.q)).max(0.0);
            mean.push(mu * scale + shift);
            variance.push(var * scale * scale);
        }
        Predictions { mean, variance }
    }

    pub fn to_dump(&self) -> KrigingModelDump {
        KrigingModelDump {
            theta: self.theta.clone(),
            sigma2: self.sigma2,
            beta: self.system.beta,
            nugget: self.system.nugget,
            loo_objective: self.loo_sse,
            standardization: self.standardization.clone(),
            training_inputs: self.x_train.clone(),
            training_outputs: self.t_train.clone(),
        }
    }

    pub fn from_dump(d: KrigingModelDump) -> Result<Self> {
        let mut model =
            KrigingModel::build(&d.training_inputs, &d.training_outputs, &d.theta, d.nugget)?;
        if model.standardization != d.standardization || model.system.beta != d.beta {
            return Err(Error::config(
                "model dump is inconsistent with its training data",
            ));
        }
        model.sigma2 = d.sigma2;
        model.loo_sse = d.loo_objective;
        Ok(model)
    }
}

impl PartialEq for KrigingModel {
    fn eq(&self, other: &Self) -> bool {
        self.to_dump() == other.to_dump()
    }
}

/// Serialized form of a [`KrigingModel`]. Quantities are on the standardized
/// scale; the factorization is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigingModelDump {
    pub theta: Vec<f64>,
    pub sigma2: f64,
    pub beta: f64,
    pub nugget: f64,
    pub loo_objective: f64,
    pub standardization: Standardization,
    pub training_inputs: SampleSet,
    pub training_outputs: Vec<f64>,
}

impl Serialize for KrigingModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_dump().serialize(s)
    }
}

impl<'de> Deserialize<'de> for KrigingModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let dump = KrigingModelDump::deserialize(d)?;
        KrigingModel::from_dump(dump).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn scale_rows(x: &[f64], theta: &[f64]) -> Vec<f64> {
    x.chunks_exact(theta.len())
        .flat_map(|row| row.iter().zip(theta).map(|(v, t)| v / t))
        .collect()
}

pub(crate) fn validate_training(x: &SampleSet, t: &[f64]) -> Result<()> {
    if x.len() != t.len() {
        return Err(Error::Fit(format!(
            "{} inputs but {} outputs",
            x.len(),
            t.len()
        )));
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("training outputs must be finite".into()));
    }
    if let Some((i, j)) = find_duplicate(x) {
        return Err(Error::Fit(format!(
            "training rows {i} and {j} are identical"
        )));
    }
    Ok(())
}

fn find_duplicate(x: &SampleSet) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    let cmp = |a: &usize, b: &usize| {
        x.row(*a)
            .iter()
            .zip(x.row(*b))
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    order.sort_by(cmp);
    order
        .windows(2)
        .find(|w| x.row(w[0]) == x.row(w[1]))
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
}
