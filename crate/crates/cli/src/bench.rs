//! The `bench` self-check of the analytic suite.

use std::path::Path;
use std::time::Instant;

use ktsa_core::active_learning::{run_al, ALConfig};
use ktsa_core::evaluation::{
    analytic_suite, brute_force_pf, PfReport, Provenance, REFERENCE_SAMPLES, REFERENCE_SEED,
};
use ktsa_core::kriging::FitConfig;
use ktsa_core::{Error, Result};

use crate::output::{ensure_dir, write_csv};

/// Column order of `bench.csv`.
pub const BENCH_CSV_HEADER: [&str; 9] = [
    "name",
    "pf_ref",
    "provenance",
    "pf_recomputed",
    "reference_ok",
    "pf_hat",
    "relative_error",
    "n_total",
    "t_total",
];

/// Recomputes every stored reference with [`REFERENCE_SAMPLES`] samples:
/// brute-force references must reproduce exactly and closed forms must
/// agree within three binomial standard deviations. Unless `skip_al`, also
/// runs active learning with default settings on each benchmark. Writes
/// `bench.csv`; a reference that does not reproduce is an invariant error.
pub fn run_bench(seed: u64, n_pool: usize, skip_al: bool, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for case in analytic_suite() {
        let p = case.pf_ref();
        let mc = brute_force_pf(&case.kind, REFERENCE_SAMPLES, REFERENCE_SEED)?;
        let (provenance, ok) = match case.reference.provenance {
            Provenance::MonteCarlo { .. } => ("monte_carlo", mc == p),
            Provenance::ClosedForm => {
                let sigma = (p * (1.0 - p) / REFERENCE_SAMPLES as f64).sqrt();
                ("closed_form", (mc - p).abs() <= 3.0 * sigma)
            }
        };
        if !ok {
            bad.push(case.name.clone());
        }
        let mut row = vec![
            case.name.clone(),
            p.to_string(),
            provenance.to_string(),
            mc.to_string(),
            ok.to_string(),
        ];
        if skip_al {
            row.extend([String::new(), String::new(), String::new(), String::new()]);
            println!(
                "{:<12} pf_ref = {p:.6} ({provenance}), recomputed {mc:.6}, ok = {ok}",
                case.name
            );
        } else {
            let cfg = ALConfig {
                n_pool,
                seed,
                ..ALConfig::default()
            };
            let start = Instant::now();
            let out = run_al(&case.uncertainty(seed), &case, &cfg, &FitConfig::default())
                .map_err(|a| a.error)?;
            let r = PfReport::from_al(&out, cfg.n_initial, None)?;
            let rel = (r.pf_hat - p).abs() / p;
            println!(
                "{:<12} pf_ref = {p:.6} ({provenance}), recomputed {mc:.6}, ok = {ok}; AL pf_hat = {:.6} ({:.1}%), N_total = {}",
                case.name,
                r.pf_hat,
                100.0 * rel,
                r.n_total
            );
            row.extend([
                r.pf_hat.to_string(),
                rel.to_string(),
                r.n_total.to_string(),
                format!("{:.3}", start.elapsed().as_secs_f64()),
            ]);
        }
        rows.push(row);
    }
    write_csv(&out.join("bench.csv"), &BENCH_CSV_HEADER, &rows)?;
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Invariant(format!(
            "stored references do not reproduce: {}",
            bad.join(", ")
        )))
    }
}
