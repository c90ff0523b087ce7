//! `ktsa`: estimate small probabilities of transient instability with
//! active-learning Kriging.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 numerical or
//! evaluator failure, 3 internal invariant violation.

mod bench;
mod cct;
mod config;
mod mcs;
mod output;
mod run;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ktsa_core::{Error, Result};

use crate::cct::CctRequest;
use crate::config::{Experiment, ExperimentConfig};
use crate::sweep::SweepParameter;

#[derive(Parser)]
#[command(
    name = "ktsa",
    version,
    about = "Active-learning Kriging for rare transient instability"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for evaluator calls and pool prediction (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Log progress to stderr; repeat for more detail.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Active learning, reference labels and reports.
    RunAl(RunArgs),
    /// Direct Monte Carlo over the configured pool.
    RunMcs(RunArgs),
    /// Critical clearing time and margin of one realization.
    Cct(CctArgs),
    /// Repeat run-al over values of one parameter.
    Sweep(SweepArgs),
    /// Check the analytic benchmark references and run active learning on each.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's output_dir, else ./ktsa-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's root seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CctArgs {
    /// Experiment config with a grid evaluator.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in case (smib, wscc9) or grid case JSON file.
    #[arg(long, conflicts_with = "config")]
    case: Option<String>,
    /// Contingency JSON file.
    #[arg(long)]
    contingency: Option<PathBuf>,
    #[arg(long)]
    fault_bus: Option<u32>,
    /// Identifier of the line tripped to clear the fault.
    #[arg(long)]
    trip: Option<String>,
    /// Fault clearing time (s).
    #[arg(long)]
    fct: Option<f64>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Uncertainty spec JSON used by --nominal.
    #[arg(long)]
    uncertainty: Option<PathBuf>,
    /// Evaluate at the median of every input.
    #[arg(long)]
    nominal: bool,
    /// Input values, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    sample: Option<Vec<f64>>,
    /// Write the rotor-angle trajectory at t_fct to this CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Also write cct.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// n_v (pool size), n_e or l_max.
    #[arg(long)]
    parameter: SweepParameter,
    /// Values, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    values: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pool size of the active-learning runs.
    #[arg(long, default_value_t = 100_000)]
    pool: usize,
    /// Only check the references.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invariant(_) => 3,
        e if e.is_numerical() => 2,
        _ => 1,
    }
}

fn load_experiment(path: &Path, seed: Option<u64>) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn out_dir(arg: &Option<PathBuf>, exp_dir: Option<&PathBuf>, base: &Path) -> PathBuf {
    match (arg, exp_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => base.join(p),
        (None, None) => PathBuf::from("ktsa-out"),
    }
}

fn resolve(path: &Path, seed: Option<u64>) -> Result<(Experiment, PathBuf)> {
    let (cfg, base) = load_experiment(path, seed)?;
    let exp = cfg.resolve(&base)?;
    Ok((exp, base))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::RunAl(a) => {
            let (exp, base) = resolve(&a.config, a.seed)?;
            let out = out_dir(&a.out, exp.config.output_dir.as_ref(), &base);
            let r = run::run_experiment(&exp, &out)?;
            let exact = exp.analytic.as_ref().map(|c| c.pf_ref());
            println!("{}", run::summarize(&r.report, exact));
            if let Some(b) = &r.baseline {
                println!("{}", run::summarize(b, exact));
            }
            println!("outputs in {}", out.display());
        }
        Command::RunMcs(a) => {
            let (exp, base) = resolve(&a.config, a.seed)?;
            let out = out_dir(&a.out, exp.config.output_dir.as_ref(), &base);
            let r = mcs::run_mcs(&exp, &out)?;
            let cov = r
                .cov_pf
                .map(|c| format!("{c:.4}"))
                .unwrap_or_else(|| "undefined".into());
            println!(
                "direct MCS: {} samples, {} unstable, pf_ref = {:.6}, cov = {cov}, {} failed evaluations",
                r.n_evaluations,
                r.n_unstable(),
                r.pf_ref,
                r.failures.len()
            );
            println!("outputs in {}", out.display());
        }
        Command::Cct(a) => {
            let req = CctRequest {
                config: a.config,
                case: a.case,
                contingency: a.contingency,
                fault_bus: a.fault_bus,
                trip: a.trip,
                fct: a.fct,
                lo: a.lo,
                hi: a.hi,
                tol: a.tol,
                uncertainty: a.uncertainty,
                nominal: a.nominal,
                sample: a.sample,
                trajectory: a.trajectory,
                out: a.out,
            };
            println!("{}", cct::describe(&cct::run_cct(&req)?));
        }
        Command::Sweep(a) => {
            let (cfg, base) = load_experiment(&a.config, a.seed)?;
            let out = out_dir(&a.out, cfg.output_dir.as_ref(), &base);
            sweep::run_sweep(&cfg, &base, a.parameter, &a.values, &out)?;
            println!("outputs in {}", out.display());
        }
        Command::Bench(a) => {
            let out = a.out.unwrap_or_else(|| PathBuf::from("ktsa-out"));
            bench::run_bench(a.seed, a.pool, a.quick, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
