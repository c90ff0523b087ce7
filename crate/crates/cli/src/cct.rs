//! The `cct` command: critical clearing time and margin of one realization.

use std::path::{Path, PathBuf};

use ktsa_core::powersim::{tsm, CctSearch, Contingency, GridCase, Margin, PreparedSystem};
use ktsa_core::sampling::UncertaintySpec;
use ktsa_core::{Error, Result};
use serde::Serialize;

use crate::config::{
    builtin_contingency, builtin_uncertainty, load_case, nominal_point, CaseSource,
    EvaluatorConfig, ExperimentConfig, BUILTIN_CASES,
};
use crate::output::{ensure_dir, write_csv, write_json};

/// Where the grid case, contingency and inputs come from.
#[derive(Debug, Clone, Default)]
pub struct CctRequest {
    pub config: Option<PathBuf>,
    /// Built-in name or grid case JSON path.
    pub case: Option<String>,
    pub contingency: Option<PathBuf>,
    pub fault_bus: Option<u32>,
    pub trip: Option<String>,
    pub fct: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub tol: Option<f64>,
    pub uncertainty: Option<PathBuf>,
    pub nominal: bool,
    pub sample: Option<Vec<f64>>,
    pub trajectory: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct CctReport {
    pub case: String,
    pub contingency: Contingency,
    pub search: CctSearch,
    pub x: Vec<f64>,
    #[serde(flatten)]
    pub margin: Margin,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {what} {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        Error::config(format!(
            "{what} {}: {}: {}",
            path.display(),
            e.path(),
            e.inner()
        ))
    })
}

struct Setup {
    case: GridCase,
    contingency: Option<Contingency>,
    search: CctSearch,
    uncertainty: Option<UncertaintySpec>,
}

fn setup(req: &CctRequest) -> Result<Setup> {
    let cwd = PathBuf::from(".");
    if let Some(path) = &req.config {
        let cfg = ExperimentConfig::load(path)?;
        let base = path.parent().unwrap_or(&cwd);
        let EvaluatorConfig::Grid {
            case,
            contingency,
            search,
        } = &cfg.evaluator
        else {
            return Err(Error::config(
                "evaluator: the cct command needs a grid evaluator",
            ));
        };
        let (grid, builtin) = load_case(case, base)?;
        return Ok(Setup {
            contingency: contingency
                .clone()
                .or_else(|| builtin.map(builtin_contingency)),
            uncertainty: cfg
                .uncertainty
                .clone()
                .or_else(|| builtin.and_then(|n| builtin_uncertainty(n, 0))),
            case: grid,
            search: *search,
        });
    }
    let name = req.case.clone().unwrap_or_else(|| "wscc9".into());
    let source = if BUILTIN_CASES.contains(&name.as_str()) {
        CaseSource::Builtin(name)
    } else {
        CaseSource::Path(PathBuf::from(name))
    };
    let (grid, builtin) = load_case(&source, &cwd)?;
    Ok(Setup {
        contingency: builtin.map(builtin_contingency),
        uncertainty: builtin.and_then(|n| builtin_uncertainty(n, 0)),
        case: grid,
        search: CctSearch::default(),
    })
}

/// Resolves the request, computes the margin and writes the optional
/// trajectory CSV (`time`, one rotor angle per machine in rad, and the
/// largest pairwise angle difference) and `cct.json` under `out`.
pub fn run_cct(req: &CctRequest) -> Result<CctReport> {
    let mut s = setup(req)?;
    if let Some(path) = &req.contingency {
        s.contingency = Some(read_json(path, "contingency")?);
    }
    if let Some(path) = &req.uncertainty {
        s.uncertainty = Some(read_json(path, "uncertainty spec")?);
    }
    let mut ctg = match (s.contingency, &req.fault_bus, &req.trip, req.fct) {
        (Some(c), ..) => c,
        (None, Some(bus), Some(line), Some(fct)) => Contingency::new(*bus, line.clone(), fct),
        _ => {
            return Err(Error::config(
                "no contingency: pass --contingency or all of --fault-bus, --trip and --fct",
            ))
        }
    };
    if let Some(b) = req.fault_bus {
        ctg.fault_bus = b;
    }
    if let Some(l) = &req.trip {
        ctg.tripped_line = l.clone();
    }
    if let Some(f) = req.fct {
        ctg.t_fct = f;
    }
    let mut search = s.search;
    search.lo = req.lo.unwrap_or(search.lo);
    search.hi = req.hi.unwrap_or(search.hi);
    search.tol = req.tol.unwrap_or(search.tol);
    ctg.validate(&s.case)?;

    let dim = s.case.input_dim();
    let x = match (&req.sample, req.nominal) {
        (Some(_), true) => {
            return Err(Error::config("pass either --sample or --nominal, not both"))
        }
        (Some(v), false) => v.clone(),
        (None, true) => match &s.uncertainty {
            Some(u) => nominal_point(u),
            None if dim == 0 => Vec::new(),
            None => {
                return Err(Error::config(
                    "--nominal needs an uncertainty spec for this case",
                ))
            }
        },
        (None, false) if dim == 0 => Vec::new(),
        (None, false) => return Err(Error::config("pass --sample or --nominal")),
    };
    if x.len() != dim {
        return Err(Error::config(format!(
            "the case takes {dim} inputs, got {}",
            x.len()
        )));
    }
    let margin = tsm(&s.case, &x, &ctg, &search)?;
    let report = CctReport {
        case: s.case.name.clone(),
        contingency: ctg,
        search,
        x,
        margin,
    };
    if let Some(path) = &req.trajectory {
        write_trajectory(&s.case, &report, path)?;
    }
    if let Some(out) = &req.out {
        ensure_dir(out)?;
        write_json(&out.join("cct.json"), &report)?;
    }
    Ok(report)
}

fn write_trajectory(case: &GridCase, r: &CctReport, path: &Path) -> Result<()> {
    let sys = PreparedSystem::new(case, &r.x, &r.contingency)?;
    let traj = sys.trajectory(r.contingency.t_fct);
    let mut header = vec!["time".to_string()];
    header.extend(case.machines.iter().map(|m| format!("angle_bus{}", m.bus)));
    header.push("max_angle_difference".into());
    let rows: Vec<Vec<String>> = (0..traj.time.len())
        .map(|t| {
            let mut row = vec![traj.time[t].to_string()];
            row.extend(traj.angles.iter().map(|a| a[t].to_string()));
            row.push(traj.max_angle_difference[t].to_string());
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(path, &header, &rows)
}

pub fn describe(r: &CctReport) -> String {
    let m = &r.margin;
    let mut s = format!(
        "case {}, fault at bus {}, trip {}, t_fct = {} s\nT_cct = {:.6} s\nmargin = {:.6} s\nat t_fct: {}",
        r.case,
        r.contingency.fault_bus,
        r.contingency.tripped_line,
        r.contingency.t_fct,
        m.cct,
        m.margin,
        if m.stable_at_fct { "stable" } else { "unstable" }
    );
    if let Some(c) = m.censored {
        s += &format!("\nT_cct censored at the search bracket ({c:?})");
    }
    s
}
