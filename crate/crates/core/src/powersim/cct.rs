use serde::{Deserialize, Serialize};

use super::case::{CctSearch, Contingency, GridCase};
use super::dynamics::{wrap_at, PreparedSystem};
use crate::error::{Error, Result};

/// Why the bisection could not bracket the critical clearing time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Censoring {
    /// Stable even at the upper end of the bracket; CCT reported as `hi`.
    StableAtHi,
    /// Unstable already at the lower end; CCT reported as `lo`.
    UnstableAtLo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CctResult {
    /// Critical clearing time (s).
    pub cct: f64,
    pub censored: Option<Censoring>,
    /// Number of simulations run.
    pub simulations: usize,
    /// Some simulation produced a non-finite state.
    pub blew_up: bool,
}

/// Transient stability margin `T_cct − t_fct`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    /// Margin (s); negative exactly when the system is unstable at `t_fct`.
    pub margin: f64,
    pub cct: f64,
    pub stable_at_fct: bool,
    pub censored: Option<Censoring>,
    pub simulations: usize,
    pub blew_up: bool,
}

struct Probe<'a> {
    sys: &'a PreparedSystem,
    simulations: usize,
    blew_up: bool,
}

impl Probe<'_> {
    fn stable(&mut self, fct: f64) -> bool {
        let v = self.sys.verdict(fct);
        self.simulations += 1;
        self.blew_up |= v.blew_up;
        v.stable
    }

    /// Bisects a bracket with `stable(lo)` and `!stable(hi)` already known,
    /// returning the midpoint of the final bracket.
    fn bisect(&mut self, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.stable(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

impl PreparedSystem {
    /// Bisection for the critical clearing time over `search`.
    pub fn cct(&self, search: &CctSearch) -> Result<CctResult> {
        search.validate()?;
        let mut p = Probe {
            sys: self,
            simulations: 0,
            blew_up: false,
        };
        let (cct, censored) = if search.lo == search.hi {
            (search.lo, None)
        } else if !p.stable(search.lo) {
            (search.lo, Some(Censoring::UnstableAtLo))
        } else if p.stable(search.hi) {
            (search.hi, Some(Censoring::StableAtHi))
        } else {
            (p.bisect(search.lo, search.hi, search.tol), None)
        };
        Ok(CctResult {
            cct,
            censored,
            simulations: p.simulations,
            blew_up: p.blew_up,
        })
    }

    /// Margin at clearing time `t_fct`.
    ///
    /// The system is first simulated at `t_fct` itself, and the bisection
    /// then runs on whichever side of `t_fct` holds the boundary. The sign
    /// of the margin therefore always agrees with a direct simulation at
    /// `t_fct`.
    pub fn margin(&self, t_fct: f64, search: &CctSearch) -> Result<Margin> {
        search.validate()?;
        if !(search.lo < t_fct && t_fct < search.hi) {
            return Err(Error::config(format!(
                "t_fct {t_fct} must lie strictly inside the CCT bracket [{}, {}]",
                search.lo, search.hi
            )));
        }
        let mut p = Probe {
            sys: self,
            simulations: 0,
            blew_up: false,
        };
        let stable_at_fct = p.stable(t_fct);
        let (cct, censored) = if stable_at_fct {
            if p.stable(search.hi) {
                (search.hi, Some(Censoring::StableAtHi))
            } else {
                (p.bisect(t_fct, search.hi, search.tol), None)
            }
        } else if !p.stable(search.lo) {
            (search.lo, Some(Censoring::UnstableAtLo))
        } else {
            (p.bisect(search.lo, t_fct, search.tol), None)
        };
        Ok(Margin {
            margin: cct - t_fct,
            cct,
            stable_at_fct,
            censored,
            simulations: p.simulations,
            blew_up: p.blew_up,
        })
    }
}

/// Critical clearing time of `ctg` (its own `t_fct` is ignored) for the
/// realization `x`.
pub fn compute_cct(
    case: &GridCase,
    x: &[f64],
    ctg: &Contingency,
    search: &CctSearch,
) -> Result<CctResult> {
    ctg.validate(case)?;
    let sys = PreparedSystem::new(case, x, ctg).map_err(wrap_at(search.lo))?;
    sys.cct(search)
}

/// Transient stability margin `T_cct(x) − t_fct` for the contingency.
pub fn tsm(case: &GridCase, x: &[f64], ctg: &Contingency, search: &CctSearch) -> Result<Margin> {
    ctg.validate(case)?;
    let sys = PreparedSystem::new(case, x, ctg).map_err(wrap_at(ctg.t_fct))?;
    sys.margin(ctg.t_fct, search)
}
