use super::case::{CctSearch, Contingency, GridCase};
use super::cct::tsm;
use super::dynamics::{wrap_at, PreparedSystem};
use crate::active_learning::Evaluator;
use crate::error::{Error, Result};
use crate::sampling::{MarginalSpec, UncertaintySpec};

/// Stability margin of one contingency on a grid case, as an
/// [`Evaluator`] over the case's uncertain inputs.
#[derive(Debug, Clone)]
pub struct GridEvaluator {
    case: GridCase,
    contingency: Contingency,
    search: CctSearch,
}

impl GridEvaluator {
    pub fn new(case: GridCase, contingency: Contingency, search: CctSearch) -> Result<Self> {
        case.validate()?;
        contingency.validate(&case)?;
        search.validate()?;
        if !(search.lo < contingency.t_fct && contingency.t_fct < search.hi) {
            return Err(Error::config(format!(
                "contingency t_fct {} must lie strictly inside the CCT bracket [{}, {}]",
                contingency.t_fct, search.lo, search.hi
            )));
        }
        Ok(GridEvaluator {
            case,
            contingency,
            search,
        })
    }

    pub fn case(&self) -> &GridCase {
        &self.case
    }

    pub fn contingency(&self) -> &Contingency {
        &self.contingency
    }

    pub fn search(&self) -> &CctSearch {
        &self.search
    }
}

impl Evaluator for GridEvaluator {
    fn dim(&self) -> usize {
        self.case.input_dim()
    }

    fn margin(&self, x: &[f64]) -> Result<f64> {
        Ok(tsm(&self.case, x, &self.contingency, &self.search)?.margin)
    }

    /// One simulation at the contingency's clearing time.
    fn is_failure(&self, x: &[f64]) -> Result<bool> {
        let t_fct = self.contingency.t_fct;
        let sys = PreparedSystem::new(&self.case, x, &self.contingency).map_err(wrap_at(t_fct))?;
        Ok(!sys.verdict(t_fct).stable)
    }
}

impl GridCase {
    /// Input model of [`GridCase::wscc9`]: the three load scalings are
    /// N(1, 0.05²) and the wind speed at the farm is Weibull with scale
    /// 11.2 m/s and shape 2.2.
    pub fn wscc9_uncertainty(seed: u64) -> UncertaintySpec {
        let load = MarginalSpec::gaussian(1.0, 0.05);
        UncertaintySpec::independent(
            vec![
                load.clone(),
                load.clone(),
                load,
                MarginalSpec::weibull(11.2, 2.2),
            ],
            seed,
        )
    }
}
