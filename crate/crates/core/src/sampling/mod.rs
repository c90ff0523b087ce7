//! Sampling of the uncertain inputs.
//!
//! Dependence between inputs follows a Gaussian copula with block-diagonal
//! equi-correlation structure: inputs are partitioned into groups, members of
//! a group share one pairwise correlation coefficient (on the normal-score
//! scale) and different groups are independent.

mod marginal;
mod wind;

pub use marginal::{load_empirical, norm_cdf, norm_ppf, MarginalSpec};
pub use wind::{wind_power, WindTurbineCurve};

use nalgebra::DMatrix;
use rand::distributions::Open01;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// Members of one dependence group and their common correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationGroup {
    pub members: Vec<usize>,
    #[serde(default)]
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySpec {
    pub dims: Vec<MarginalSpec>,
    pub groups: Vec<CorrelationGroup>,
    #[serde(default)]
    pub seed: u64,
}

impl UncertaintySpec {
    /// All dimensions mutually independent.
    pub fn independent(dims: Vec<MarginalSpec>, seed: u64) -> Self {
        let groups = (0..dims.len())
            .map(|i| CorrelationGroup {
                members: vec![i],
                rho: 0.0,
            })
            .collect();
        UncertaintySpec { dims, groups, seed }
    }

    /// `dim` independent standard normals.
    pub fn standard_normal(dim: usize, seed: u64) -> Self {
        Self::independent(vec![MarginalSpec::standard_normal(); dim], seed)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        UncertaintySpec {
            seed,
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::config("uncertainty spec has no dimensions"));
        }
        for (i, m) in self.dims.iter().enumerate() {
            m.validate()
                .map_err(|e| Error::config(format!("dims[{i}]: {e}")))?;
        }
        let mut seen = vec![false; self.dims.len()];
        for (g, group) in self.groups.iter().enumerate() {
            if group.members.is_empty() {
                return Err(Error::config(format!("groups[{g}] has no members")));
            }
            for &m in &group.members {
                if m >= self.dims.len() {
                    return Err(Error::config(format!(
                        "groups[{g}] references dimension {m}, but only {} exist",
                        self.dims.len()
                    )));
                }
                if seen[m] {
                    return Err(Error::config(format!(
                        "dimension {m} belongs to more than one group"
                    )));
                }
                seen[m] = true;
            }
            let k = group.members.len();
            let rho = group.rho;
            if !(-1.0..1.0).contains(&rho) {
                return Err(Error::config(format!(
                    "groups[{g}].rho = {rho} outside [-1, 1)"
                )));
            }
            if k > 1 && rho <= -1.0 / (k as f64 - 1.0) {
                return Err(Error::config(format!(
                    "groups[{g}].rho = {rho} gives a non positive definite correlation for {k} members"
                )));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::config(format!(
                "dimension {missing} is not assigned to any group"
            )));
        }
        Ok(())
    }

    /// Lower Cholesky factors of each multi-member group.
    fn group_factors(&self) -> Vec<(Vec<usize>, DMatrix<f64>)> {
        self.groups
            .iter()
            .filter(|g| g.members.len() > 1)
            .map(|g| {
                let k = g.members.len();
                let corr = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { g.rho });
                let l = corr
                    .cholesky()
                    .expect("validated equi-correlation matrix is positive definite")
                    .unpack();
                (g.members.clone(), l)
            })
            .collect()
    }
}

/// Provenance of a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleTag {
    Initial,
    Pool,
    Enriched { iteration: usize },
    Reference,
}

/// Row-major `n x dim` matrix of input samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampleSetRepr", into = "SampleSetRepr")]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
    tag: SampleTag,
}

#[derive(Serialize, Deserialize)]
struct SampleSetRepr {
    tag: SampleTag,
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl From<SampleSet> for SampleSetRepr {
    fn from(s: SampleSet) -> Self {
        SampleSetRepr {
            tag: s.tag,
            dim: s.dim,
            rows: s.rows().map(<[f64]>::to_vec).collect(),
        }
    }
}

impl TryFrom<SampleSetRepr> for SampleSet {
    type Error = Error;

    fn try_from(r: SampleSetRepr) -> Result<Self> {
        SampleSet::from_rows(r.dim, &r.rows, r.tag)
    }
}

impl SampleSet {
    pub fn empty(dim: usize, tag: SampleTag) -> Self {
        SampleSet {
            dim,
            data: Vec::new(),
            tag,
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R], tag: SampleTag) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::config(format!(
                    "sample {i} has {} entries, expected {dim}",
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("sample {i} has non-finite entries")));
            }
            data.extend_from_slice(r);
        }
        Ok(SampleSet { dim, data, tag })
    }

    pub fn from_flat(dim: usize, data: Vec<f64>, tag: SampleTag) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::config(format!(
                "flat sample buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sample buffer has non-finite entries"));
        }
        Ok(SampleSet { dim, data, tag })
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tag(&self) -> SampleTag {
        self.tag
    }

    pub fn with_tag(mut self, tag: SampleTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, indices: &[usize], tag: SampleTag) -> SampleSet {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        SampleSet {
            dim: self.dim,
            data,
            tag,
        }
    }

    pub(crate) fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
    }
}

fn draw_scores(
    spec: &UncertaintySpec,
    factors: &[(Vec<usize>, DMatrix<f64>)],
    rng: &mut Rng,
) -> Vec<f64> {
    let mut eps: Vec<f64> = (0..spec.dim())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    for (members, l) in factors {
        let raw: Vec<f64> = members.iter().map(|&m| eps[m]).collect();
        for (a, &m) in members.iter().enumerate() {
            eps[m] = (0..=a).map(|b| l[(a, b)] * raw[b]).sum();
        }
    }
    eps
}

/// Plain i.i.d. copula sampling.
pub fn mc_sample(spec: &UncertaintySpec, n: usize) -> Result<SampleSet> {
    spec.validate()?;
    let factors = spec.group_factors();
    let mut rng = rng_from_seed(spec.seed);
    let m = spec.dim();
    let mut data = Vec::with_capacity(n * m);
    for _ in 0..n {
        let z = draw_scores(spec, &factors, &mut rng);
        data.extend(
            spec.dims
                .iter()
                .zip(&z)
                .map(|(d, &z)| d.from_normal_score(z)),
        );
    }
    Ok(SampleSet {
        dim: m,
        data,
        tag: SampleTag::Pool,
    })
}

/// Latin hypercube design with the group correlations imposed by rank
/// reordering (Iman-Conover): each dimension keeps exactly one point per
/// equal-probability stratum, and within each group the ranks follow a set
/// of correlated normal scores.
pub fn lhs_sample(spec: &UncertaintySpec, n: usize) -> Result<SampleSet> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::config("latin hypercube needs at least one sample"));
    }
    let m = spec.dim();
    let mut rng = rng_from_seed(spec.seed);

    // stratified uniforms, column-major
    let mut u: Vec<Vec<f64>> = Vec::with_capacity(m);
    for _ in 0..m {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let col = perm
            .iter()
            .map(|&p| {
                let jitter: f64 = rng.sample(Open01);
                (p as f64 + jitter) / n as f64
            })
            .collect();
        u.push(col);
    }

    for (members, l) in spec.group_factors() {
        let k = members.len();
        let mut scores = vec![vec![0.0; n]; k];
        for i in 0..n {
            let raw: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            for a in 0..k {
                scores[a][i] = (0..=a).map(|b| l[(a, b)] * raw[b]).sum();
            }
        }
        for (a, &dim) in members.iter().enumerate() {
            let mut sorted = u[dim].clone();
            sorted.sort_by(f64::total_cmp);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&x, &y| scores[a][x].total_cmp(&scores[a][y]));
            for (rank, &row) in order.iter().enumerate() {
                u[dim][row] = sorted[rank];
            }
        }
    }

    let mut data = Vec::with_capacity(n * m);
    for i in 0..n {
        data.extend(
            spec.dims
                .iter()
                .enumerate()
                .map(|(j, d)| d.quantile(u[j][i])),
        );
    }
    Ok(SampleSet {
        dim: m,
        data,
        tag: SampleTag::Initial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    /// Van der Waerden scores of a column.
    fn normal_scores(a: &[f64]) -> Vec<f64> {
        let n = a.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| a[x].total_cmp(&a[y]));
        let mut out = vec![0.0; n];
        for (rank, &i) in order.iter().enumerate() {
            out[i] = norm_ppf((rank + 1) as f64 / (n + 1) as f64);
        }
        out
    }

    fn ks_stat(values: &[f64], m: &MarginalSpec) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        v.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = m.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    fn grouped_spec(rho: f64, seed: u64) -> UncertaintySpec {
        UncertaintySpec {
            dims: vec![
                MarginalSpec::weibull(11.2, 2.2),
                MarginalSpec::weibull(11.2, 2.2),
                MarginalSpec::gaussian(1.0, 0.05),
            ],
            groups: vec![
                CorrelationGroup {
                    members: vec![0, 1],
                    rho,
                },
                CorrelationGroup {
                    members: vec![2],
                    rho: 0.0,
                },
            ],
            seed,
        }
    }

    #[test]
    fn lhs_single_gaussian_one_per_quartile() {
        let spec = UncertaintySpec::independent(vec![MarginalSpec::gaussian(0.0, 1.0)], 3);
        let s = lhs_sample(&spec, 4).unwrap();
        let mut strata: Vec<usize> = s
            .column(0)
            .iter()
            .map(|&x| (norm_cdf(x) * 4.0).floor() as usize)
            .collect();
        strata.sort();
        assert_eq!(strata, vec![0, 1, 2, 3]);
    }

    #[test]
    fn lhs_weibull_median() {
        let spec = UncertaintySpec::independent(vec![MarginalSpec::weibull(11.2, 2.2)], 5);
        let mut v = lhs_sample(&spec, 10_000).unwrap().column(0);
        v.sort_by(f64::total_cmp);
        let median = 0.5 * (v[4999] + v[5000]);
        let expected = 11.2 * 2f64.ln().powf(1.0 / 2.2);
        assert!(
            (median / expected - 1.0).abs() < 0.02,
            "{median} vs {expected}"
        );
    }

    #[test]
    fn lhs_group_rank_correlation_and_stratification() {
        let n = 10_000;
        let s = lhs_sample(&grouped_spec(0.8, 9), n).unwrap();
        let a = s.column(0);
        let b = s.column(1);
        let r = pearson(&normal_scores(&a), &normal_scores(&b));
        assert!((r - 0.8).abs() < 0.05, "rank correlation {r}");
        let c = pearson(&normal_scores(&a), &normal_scores(&s.column(2)));
        assert!(c.abs() < 0.05, "cross-group correlation {c}");

        // exact stratification survives the reordering
        let m = MarginalSpec::weibull(11.2, 2.2);
        for col in [&a, &b] {
            let mut counts = vec![0usize; n];
            for &x in col.iter() {
                let k = ((m.cdf(x) * n as f64).floor() as usize).min(n - 1);
                counts[k] += 1;
            }
            assert!(counts.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn mc_zero_samples_is_empty() {
        let s = mc_sample(&UncertaintySpec::standard_normal(2, 1), 0).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.len(), 0);
    }

    #[test]
    fn mc_gaussian_moments() {
        let spec = UncertaintySpec::independent(vec![MarginalSpec::gaussian(1.0, 0.05)], 21);
        let v = mc_sample(&spec, 100_000).unwrap().column(0);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 1.0).abs() < 0.002, "mean {mean}");
        assert!((std - 0.05).abs() < 0.002, "std {std}");
    }

    #[test]
    fn mc_independent_groups_uncorrelated() {
        let s = mc_sample(&UncertaintySpec::standard_normal(2, 4), 10_000).unwrap();
        let r = pearson(&s.column(0), &s.column(1));
        assert!(r.abs() < 0.05);
    }

    #[test]
    fn mc_copula_correlation_and_marginals() {
        let n = 20_000;
        let spec = grouped_spec(0.8, 17);
        let s = mc_sample(&spec, n).unwrap();
        let r = pearson(&normal_scores(&s.column(0)), &normal_scores(&s.column(1)));
        assert!((r - 0.8).abs() < 3.0 / (n as f64).sqrt(), "{r}");
        let crit = 1.63 / (n as f64).sqrt();
        for j in 0..3 {
            let d = ks_stat(&s.column(j), &spec.dims[j]);
            assert!(d < crit, "dim {j}: KS {d} >= {crit}");
        }
    }

    #[test]
    fn empirical_resampling_frequencies() {
        let spec =
            UncertaintySpec::independent(vec![MarginalSpec::empirical(vec![1.0, 2.0, 3.0], "")], 8);
        let v = mc_sample(&spec, 100_000).unwrap().column(0);
        for target in [1.0, 2.0, 3.0] {
            let f = v.iter().filter(|&&x| x == target).count() as f64 / v.len() as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.01, "{target}: {f}");
        }
        let constant =
            UncertaintySpec::independent(vec![MarginalSpec::empirical(vec![5.0], "")], 8);
        assert!(mc_sample(&constant, 100)
            .unwrap()
            .column(0)
            .iter()
            .all(|&x| x == 5.0));
    }

    #[test]
    fn invalid_specs() {
        let mut s = grouped_spec(0.5, 1);
        s.groups[1].members.clear();
        assert!(s.validate().is_err());

        let mut s = grouped_spec(0.5, 1);
        s.groups[1].members = vec![1];
        assert!(s.validate().is_err(), "dimension in two groups");

        let mut s = grouped_spec(0.5, 1);
        s.groups.pop();
        assert!(s.validate().is_err(), "dimension without group");

        let mut s = grouped_spec(0.5, 1);
        s.groups[0] = CorrelationGroup {
            members: vec![0, 1],
            rho: -1.0,
        };
        assert!(s.validate().is_err());

        let three = UncertaintySpec {
            dims: vec![MarginalSpec::standard_normal(); 3],
            groups: vec![CorrelationGroup {
                members: vec![0, 1, 2],
                rho: -0.5,
            }],
            seed: 0,
        };
        assert!(three.validate().is_err(), "rho <= -1/(k-1)");
        assert!(lhs_sample(&three, 10).is_err());
        assert!(lhs_sample(&UncertaintySpec::standard_normal(1, 0), 0).is_err());
    }

    #[test]
    fn sample_set_json_round_trip() {
        let s = lhs_sample(&grouped_spec(0.3, 2), 7).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: SampleSet = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sampling_is_deterministic(seed in any::<u64>(), n in 1usize..200, rho in -0.4f64..0.95) {
            let spec = grouped_spec(rho, seed);
            prop_assert_eq!(lhs_sample(&spec, n).unwrap(), lhs_sample(&spec, n).unwrap());
            prop_assert_eq!(mc_sample(&spec, n).unwrap(), mc_sample(&spec, n).unwrap());
        }

        #[test]
        fn lhs_stratification_exact(seed in any::<u64>(), n in 1usize..300) {
            let spec = grouped_spec(0.6, seed);
            let s = lhs_sample(&spec, n).unwrap();
            for j in 0..3 {
                let mut strata: Vec<usize> = s.column(j).iter()
                    .map(|&x| ((spec.dims[j].cdf(x) * n as f64).floor() as usize).min(n - 1))
                    .collect();
                strata.sort();
                prop_assert_eq!(strata, (0..n).collect::<Vec<_>>());
            }
        }
    }
}
