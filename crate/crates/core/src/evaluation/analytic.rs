use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::active_learning::Evaluator;
use crate::error::{Error, Result};
use crate::sampling::{mc_sample, norm_cdf, norm_ppf, UncertaintySpec};

/// Closed-form margin functions over independent standard-normal inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticKind {
    /// `beta0 - sum(x)`.
    Linear { dim: usize, beta0: f64 },
    /// Two-dimensional series system of four branches.
    FourBranch { k: f64 },
    /// `c - x1² - x2²`: failure outside a circle.
    Quadratic { c: f64 },
    /// Distance to the nearest of `count` discs of radius `r` centred on a
    /// circle of radius `ring`, minus `r`: failure inside any disc.
    Lobes { count: usize, ring: f64, r: f64 },
}

impl AnalyticKind {
    pub fn dim(&self) -> usize {
        match self {
            AnalyticKind::Linear { dim, .. } => *dim,
            _ => 2,
        }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        match *self {
            AnalyticKind::Linear { beta0, .. } => beta0 - x.iter().sum::<f64>(),
            AnalyticKind::FourBranch { k } => {
                let (a, b) = (x[0], x[1]);
                let common = 3.0 + 0.1 * (a - b) * (a - b);
                let s = (a + b) * FRAC_1_SQRT_2;
                let t = k * FRAC_1_SQRT_2;
                (common - s).min(common + s).min(a - b + t).min(b - a + t)
            }
            AnalyticKind::Quadratic { c } => c - x[0] * x[0] - x[1] * x[1],
            AnalyticKind::Lobes { count, ring, r } => {
                (0..count)
                    .map(|i| {
                        let phi = 2.0 * PI * i as f64 / count as f64;
                        (x[0] - ring * phi.cos()).hypot(x[1] - ring * phi.sin())
                    })
                    .fold(f64::INFINITY, f64::min)
                    - r
            }
        }
    }

    /// Exact failure probability where one exists.
    pub fn closed_form_pf(&self) -> Option<f64> {
        match *self {
            AnalyticKind::Linear { dim, beta0 } => Some(norm_cdf(-beta0 / (dim as f64).sqrt())),
            // x1² + x2² is chi-square with two degrees of freedom
            AnalyticKind::Quadratic { c } => Some((-c / 2.0).exp()),
            _ => None,
        }
    }
}

/// Where a reference failure probability comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    /// Direct Monte Carlo over `n` samples of the standard-normal spec
    /// seeded with `seed`.
    MonteCarlo {
        n: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePf {
    pub value: f64,
    pub provenance: Provenance,
}

/// Cheap benchmark with a known failure probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticLimitState {
    pub name: String,
    pub kind: AnalyticKind,
    pub reference: ReferencePf,
}

/// Sample count and seed of the brute-force reference runs.
pub const REFERENCE_SAMPLES: usize = 1_000_000;
pub const REFERENCE_SEED: u64 = 20_000_003;

/// Brute-force references for the cases without a closed form, produced by
/// [`brute_force_pf`] with [`REFERENCE_SAMPLES`] and [`REFERENCE_SEED`].
const FOUR_BRANCH_PF: f64 = 0.004319;
const LOBES_PF: f64 = 0.01011;

impl AnalyticLimitState {
    /// Linear margin in `dim` inputs with `beta0` chosen so the failure
    /// probability is exactly `pf`.
    pub fn linear(name: &str, dim: usize, pf: f64) -> Result<Self> {
        if dim == 0 || !(pf > 0.0 && pf < 1.0) {
            return Err(Error::config(format!(
                "linear case needs dim >= 1 and 0 < pf < 1, got {dim} and {pf}"
            )));
        }
        let beta0 = (dim as f64).sqrt() * norm_ppf(1.0 - pf);
        Ok(AnalyticLimitState {
            name: name.to_string(),
            kind: AnalyticKind::Linear { dim, beta0 },
            reference: ReferencePf {
                value: pf,
                provenance: Provenance::ClosedForm,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn pf_ref(&self) -> f64 {
        self.reference.value
    }

    /// Independent standard-normal inputs for this case.
    pub fn uncertainty(&self, seed: u64) -> UncertaintySpec {
        UncertaintySpec::standard_normal(self.dim(), seed)
    }
}

impl Evaluator for AnalyticLimitState {
    fn dim(&self) -> usize {
        self.kind.dim()
    }

    fn margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Evaluation(format!(
                "{} expects {} inputs, got {}",
                self.name,
                self.dim(),
                x.len()
            )));
        }
        Ok(self.kind.margin(x))
    }
}

/// Fraction of `n` standard-normal samples (seeded with `seed`) where the
/// margin is negative.
pub fn brute_force_pf(kind: &AnalyticKind, n: usize, seed: u64) -> Result<f64> {
    let pool = mc_sample(&UncertaintySpec::standard_normal(kind.dim(), seed), n)?;
    let n_fail = pool.rows().filter(|x| kind.margin(x) < 0.0).count();
    Ok(n_fail as f64 / n as f64)
}

/// The shipped benchmarks:
///
/// - `linear`: two inputs, failure probability 10⁻²;
/// - `linear_p10`: two inputs, failure probability 0.1;
/// - `four_branch`: the series system with `k = 6`;
/// - `quadratic`: failure outside a circle, probability 10⁻²;
/// - `lobes`: twelve small failure discs on a ring, probability near 10⁻².
pub fn analytic_suite() -> Vec<AnalyticLimitState> {
    let brute = |value| ReferencePf {
        value,
        provenance: Provenance::MonteCarlo {
            n: REFERENCE_SAMPLES,
            seed: REFERENCE_SEED,
        },
    };
    let closed = |value| ReferencePf {
        value,
        provenance: Provenance::ClosedForm,
    };
    let quadratic = AnalyticKind::Quadratic {
        c: -2.0 * 0.01f64.ln(),
    };
    vec![
        AnalyticLimitState::linear("linear", 2, 0.01).expect("valid linear case"),
        AnalyticLimitState::linear("linear_p10", 2, 0.1).expect("valid linear case"),
        AnalyticLimitState {
            name: "four_branch".into(),
            kind: AnalyticKind::FourBranch { k: 6.0 },
            reference: brute(FOUR_BRANCH_PF),
        },
        AnalyticLimitState {
            name: "quadratic".into(),
            reference: closed(quadratic.closed_form_pf().expect("closed form")),
            kind: quadratic,
        },
        AnalyticLimitState {
            name: "lobes".into(),
            kind: AnalyticKind::Lobes {
                count: 12,
                ring: 2.7,
                r: 0.25,
            },
            reference: brute(LOBES_PF),
        },
    ]
}

/// Looks up a benchmark of [`analytic_suite`] by name.
pub fn analytic_case(name: &str) -> Result<AnalyticLimitState> {
    let suite = analytic_suite();
    let names: Vec<String> = suite.iter().map(|c| c.name.clone()).collect();
    suite.into_iter().find(|c| c.name == name).ok_or_else(|| {
        Error::config(format!(
            "unknown analytic benchmark {name:?}; available: {}",
            names.join(", ")
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn case(name: &str) -> AnalyticLimitState {
        analytic_case(name).unwrap()
    }

    #[test]
    fn linear_reference_is_exact() {
        let c = case("linear");
        assert_eq!(c.pf_ref(), 0.01);
        assert_eq!(c.reference.provenance, Provenance::ClosedForm);
        let exact = c.kind.closed_form_pf().unwrap();
        assert!((exact - 0.01).abs() < 1e-12, "{exact}");
        // the margin crosses zero where x1 + x2 = sqrt(2) * 2.3263478740
        let AnalyticKind::Linear { beta0, .. } = c.kind else {
            unreachable!()
        };
        assert!((beta0 - 2.0f64.sqrt() * 2.326_347_874_040_841).abs() < 1e-9);
    }

    #[test]
    fn brute_force_constants_reproduce() {
        for c in analytic_suite() {
            let mc = brute_force_pf(&c.kind, REFERENCE_SAMPLES, REFERENCE_SEED).unwrap();
            match c.reference.provenance {
                Provenance::MonteCarlo { n, seed } => {
                    assert_eq!((n, seed), (REFERENCE_SAMPLES, REFERENCE_SEED));
                    assert_eq!(mc, c.pf_ref(), "{}", c.name);
                }
                Provenance::ClosedForm => {
                    // brute force agrees with the closed form to 3 sigma
                    let p = c.pf_ref();
                    let sigma = (p * (1.0 - p) / REFERENCE_SAMPLES as f64).sqrt();
                    assert!((mc - p).abs() < 3.0 * sigma, "{}: {mc} vs {p}", c.name);
                }
            }
        }
    }

    #[test]
    fn suite_is_well_formed() {
        let suite = analytic_suite();
        for (i, c) in suite.iter().enumerate() {
            assert!(c.pf_ref() > 0.0 && c.pf_ref() < 1.0, "{}", c.name);
            assert!(suite[..i].iter().all(|d| d.name != c.name));
            assert_eq!(c.uncertainty(0).dim(), c.dim());
        }
        assert!(["linear", "four_branch", "quadratic"]
            .iter()
            .all(|n| analytic_case(n).is_ok()));
        let err = analytic_case("cubic").unwrap_err();
        assert!(err.to_string().contains("four_branch"), "{err}");
    }

    #[test]
    fn hand_computed_margins() {
        let fb = case("four_branch");
        assert_eq!(fb.margin(&[0.0, 0.0]).unwrap(), 3.0);
        // on the diagonal x1 = x2 = a the first branch is 3 - sqrt(2) a
        let a = 3.0 / 2.0f64.sqrt();
        assert!(fb.margin(&[a, a]).unwrap().abs() < 1e-12);
        // across the diagonal only the third and fourth branches are active
        let d = 6.0 / 2.0f64.sqrt();
        assert!(fb.kind.margin(&[-d / 2.0, d / 2.0]).abs() < 1e-12);
        let lobes = case("lobes");
        assert!((lobes.margin(&[2.7, 0.0]).unwrap() + 0.25).abs() < 1e-12);
        assert!((lobes.margin(&[0.0, 0.0]).unwrap() - 2.45).abs() < 1e-12);
        let q = case("quadratic");
        let c = -2.0 * 0.01f64.ln();
        assert!(q.margin(&[c.sqrt(), 0.0]).unwrap().abs() < 1e-12);
        assert!(fb.margin(&[0.0]).is_err());
    }

    #[test]
    fn quadratic_pf_invariant_under_sign_flip() {
        let q = case("quadratic");
        let pool = mc_sample(&q.uncertainty(17), 20_000).unwrap();
        let fails = |sign: f64| {
            pool.rows()
                .filter(|x| q.kind.margin(&[sign * x[0], sign * x[1]]) < 0.0)
                .count()
        };
        assert!(fails(1.0) > 0);
        assert_eq!(fails(1.0), fails(-1.0));
    }

    #[test]
    fn linear_constructor_rejects_bad_input() {
        assert!(AnalyticLimitState::linear("l", 0, 0.1).is_err());
        assert!(AnalyticLimitState::linear("l", 2, 0.0).is_err());
        assert!(AnalyticLimitState::linear("l", 2, 1.0).is_err());
        let l5 = AnalyticLimitState::linear("l", 5, 0.05).unwrap();
        assert!((l5.kind.closed_form_pf().unwrap() - 0.05).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn symmetric_cases(x in -6.0f64..6.0, y in -6.0f64..6.0) {
            let fb = AnalyticKind::FourBranch { k: 6.0 };
            let q = case("quadratic").kind;
            for kind in [&fb, &q] {
                let m = kind.margin(&[x, y]);
                prop_assert!((m - kind.margin(&[-x, -y])).abs() < 1e-12);
                prop_assert!((m - kind.margin(&[y, x])).abs() < 1e-12);
            }
            // twelve-fold rotational symmetry of the lobes
            let lobes = case("lobes").kind;
            let (s, c) = (PI / 6.0).sin_cos();
            let m = lobes.margin(&[x, y]);
            prop_assert!((m - lobes.margin(&[c * x - s * y, s * x + c * y])).abs() < 1e-9);
        }
    }
}
