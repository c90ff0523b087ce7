//! The `run-mcs` workflow: direct Monte Carlo over the configured pool.

use std::path::Path;

use ktsa_core::active_learning::al_pool;
use ktsa_core::evaluation::{direct_mcs, McsResult};
use ktsa_core::Result;

use crate::config::Experiment;
use crate::output::{ensure_dir, write_json};

/// Labels `active_learning.n_pool` samples drawn exactly like the active
/// learning pool and writes `mcs.json`.
pub fn run_mcs(exp: &Experiment, out: &Path) -> Result<McsResult> {
    let cfg = &exp.config;
    ensure_dir(out)?;
    write_json(&out.join("config.json"), cfg)?;
    let pool = al_pool(&exp.spec, &cfg.active_learning)?;
    let result = direct_mcs(exp.evaluator.as_ref(), &pool, cfg.reference.policy)?;
    write_json(&out.join("mcs.json"), &result)?;
    Ok(result)
}
