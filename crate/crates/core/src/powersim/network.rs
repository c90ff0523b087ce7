//! Admittance matrices, Newton power flow and Kron reduction.

use nalgebra::{Complex, DMatrix, DVector};

use super::case::{BusKind, GridCase, Injection};
use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

const PF_TOL: f64 = 1e-8;
const PF_MAX_ITER: usize = 30;

/// Bus admittance matrix of the in-service lines, optionally skipping one.
pub(crate) fn ybus(case: &GridCase, skip_line: Option<&str>) -> Result<DMatrix<C64>> {
    let n = case.buses.len();
    let mut y = DMatrix::<C64>::zeros(n, n);
    for l in case.lines.iter().filter(|l| l.in_service) {
        if Some(l.id.as_str()) == skip_line {
            continue;
        }
        let (a, b) = (case.bus_index(l.from)?, case.bus_index(l.to)?);
        let ys = C64::new(1.0, 0.0) / C64::new(l.r, l.x);
        let sh = C64::new(0.0, l.b / 2.0);
        y[(a, a)] += ys + sh;
        y[(b, b)] += ys + sh;
        y[(a, b)] -= ys;
        y[(b, a)] -= ys;
    }
    Ok(y)
}

/// Per-bus scheduled quantities for one realization of the uncertain inputs.
#[derive(Debug, Clone)]
pub(crate) struct Schedule {
    /// Load net of renewable injection, p.u.
    pub load: Vec<C64>,
    /// Scheduled generation at PV buses, p.u.
    pub p_gen: Vec<f64>,
}

pub(crate) fn schedule(case: &GridCase, x: &[f64]) -> Result<Schedule> {
    let need = case.input_dim();
    if x.len() < need {
        return Err(Error::config(format!(
            "grid case reads {need} inputs, sample has {}",
            x.len()
        )));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!("non-finite input value {v}")));
    }
    let n = case.buses.len();
    let mut scale = vec![1.0; case.loads.len()];
    let mut res = vec![0.0; n];
    for inj in &case.injections {
        match *inj {
            Injection::LoadScale { input, load } => scale[load] *= x[input],
            Injection::Wind {
                input,
                bus,
                curve,
                units,
            } => {
                if x[input] < 0.0 {
                    return Err(Error::Evaluation(format!(
                        "negative wind speed {}",
                        x[input]
                    )));
                }
                res[case.bus_index(bus)?] += units * curve.power(x[input]) / case.base_mva;
            }
            Injection::Solar { input, bus, scale } => {
                res[case.bus_index(bus)?] += scale * x[input] / case.base_mva;
            }
        }
    }
    let mut load = vec![C64::new(0.0, 0.0); n];
    for (l, s) in case.loads.iter().zip(&scale) {
        load[case.bus_index(l.bus)?] += C64::new(l.p * s, l.q * s);
    }
    for (i, r) in res.iter().enumerate() {
        load[i] -= C64::new(*r, 0.0);
    }
    let p_gen = case
        .buses
        .iter()
        .map(|b| match b.kind {
            BusKind::Pv { p_gen, .. } => p_gen,
            _ => 0.0,
        })
        .collect();
    Ok(Schedule { load, p_gen })
}

/// Converged bus voltages.
#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    pub voltages: Vec<C64>,
    pub iterations: usize,
    /// Complex power injected into the network at each bus.
    pub injections: Vec<C64>,
}

fn injections(y: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    let vv = DVector::from_column_slice(v);
    let i = y * vv;
    v.iter().zip(i.iter()).map(|(a, b)| a * b.conj()).collect()
}

/// Newton–Raphson power flow in polar coordinates from a flat start.
pub(crate) fn power_flow(
    case: &GridCase,
    y: &DMatrix<C64>,
    sched: &Schedule,
) -> Result<PowerFlowSolution> {
    let n = case.buses.len();
    let mut vm = vec![1.0; n];
    let mut va = vec![0.0; n];
    let mut pv_or_pq = Vec::new();
    let mut pq = Vec::new();
    for (i, b) in case.buses.iter().enumerate() {
        match b.kind {
            BusKind::Slack { v, angle } => {
                vm[i] = v;
                va[i] = angle;
            }
            BusKind::Pv { v, .. } => {
                vm[i] = v;
                pv_or_pq.push(i);
            }
            BusKind::Pq => {
                pv_or_pq.push(i);
                pq.push(i);
            }
        }
    }
    let p_spec: Vec<f64> = (0..n).map(|i| sched.p_gen[i] - sched.load[i].re).collect();
    let q_spec: Vec<f64> = (0..n).map(|i| -sched.load[i].im).collect();
    let (np, nq) = (pv_or_pq.len(), pq.len());
    let g = y.map(|c| c.re);
    let b = y.map(|c| c.im);

    let mut mismatch = f64::INFINITY;
    for iter in 0..=PF_MAX_ITER {
        let v: Vec<C64> = (0..n).map(|i| C64::from_polar(vm[i], va[i])).collect();
        let s = injections(y, &v);
        let mut f = DVector::<f64>::zeros(np + nq);
        for (k, &i) in pv_or_pq.iter().enumerate() {
            f[k] = p_spec[i] - s[i].re;
        }
        for (k, &i) in pq.iter().enumerate() {
            f[np + k] = q_spec[i] - s[i].im;
        }
        mismatch = f.amax();
        if !mismatch.is_finite() {
            break;
        }
        if mismatch < PF_TOL {
            return Ok(PowerFlowSolution {
                voltages: v,
                iterations: iter,
                injections: s,
            });
        }
        if iter == PF_MAX_ITER {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(np + nq, np + nq);
        // columns: angles of pv_or_pq, then magnitudes of pq
        let dp_dva = |i: usize, j: usize| {
            if i == j {
                -s[i].im - b[(i, i)] * vm[i] * vm[i]
            } else {
                let t = va[i] - va[j];
                vm[i] * vm[j] * (g[(i, j)] * t.sin() - b[(i, j)] * t.cos())
            }
        };
        let dp_dvm = |i: usize, j: usize| {
            if i == j {
                s[i].re / vm[i] + g[(i, i)] * vm[i]
            } else {
                let t = va[i] - va[j];
                vm[i] * (g[(i, j)] * t.cos() + b[(i, j)] * t.sin())
            }
        };
        let dq_dva = |i: usize, j: usize| {
            if i == j {
                s[i].re - g[(i, i)] * vm[i] * vm[i]
            } else {
                let t = va[i] - va[j];
                -vm[i] * vm[j] * (g[(i, j)] * t.cos() + b[(i, j)] * t.sin())
            }
        };
        let dq_dvm = |i: usize, j: usize| {
            if i == j {
                s[i].im / vm[i] - b[(i, i)] * vm[i]
            } else {
                let t = va[i] - va[j];
                vm[i] * (g[(i, j)] * t.sin() - b[(i, j)] * t.cos())
            }
        };
        for (r, &i) in pv_or_pq.iter().enumerate() {
            for (c, &j) in pv_or_pq.iter().enumerate() {
                jac[(r, c)] = dp_dva(i, j);
            }
            for (c, &j) in pq.iter().enumerate() {
                jac[(r, np + c)] = dp_dvm(i, j);
            }
        }
        for (r, &i) in pq.iter().enumerate() {
            for (c, &j) in pv_or_pq.iter().enumerate() {
                jac[(np + r, c)] = dq_dva(i, j);
            }
            for (c, &j) in pq.iter().enumerate() {
                jac[(np + r, np + c)] = dq_dvm(i, j);
            }
        }
        let dx = match jac.lu().solve(&f) {
            Some(dx) => dx,
            None => break,
        };
        for (k, &i) in pv_or_pq.iter().enumerate() {
            va[i] += dx[k];
        }
        for (k, &i) in pq.iter().enumerate() {
            vm[i] += dx[np + k];
            if !(vm[i] > 0.0) {
                return Err(Error::PowerFlow {
                    iterations: iter + 1,
                    mismatch,
                });
            }
        }
    }
    Err(Error::PowerFlow {
        iterations: PF_MAX_ITER,
        mismatch,
    })
}

/// Eliminates every node not in `retained`:
/// `Y_red = Y_rr − Y_re · Y_ee⁻¹ · Y_er`, rows/columns ordered as `retained`.
pub fn kron_reduce(y: &DMatrix<C64>, retained: &[usize]) -> Result<DMatrix<C64>> {
    let n = y.nrows();
    if y.ncols() != n {
        return Err(Error::config("admittance matrix must be square"));
    }
    let mut keep = vec![false; n];
    for &r in retained {
        if r >= n || keep[r] {
            return Err(Error::config(format!("invalid retained node {r}")));
        }
        keep[r] = true;
    }
    let elim: Vec<usize> = (0..n).filter(|&i| !keep[i]).collect();
    let nr = retained.len();
    let ne = elim.len();
    let y_rr = DMatrix::from_fn(nr, nr, |i, j| y[(retained[i], retained[j])]);
    if ne == 0 {
        return Ok(y_rr);
    }
    let y_re = DMatrix::from_fn(nr, ne, |i, j| y[(retained[i], elim[j])]);
    let y_er = DMatrix::from_fn(ne, nr, |i, j| y[(elim[i], retained[j])]);
    let y_ee = DMatrix::from_fn(ne, ne, |i, j| y[(elim[i], elim[j])]);

    let scale = y_ee.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let lu = y_ee.lu();
    let min_pivot = lu
        .u()
        .diagonal()
        .iter()
        .map(|c| c.norm())
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-12 * scale) {
        return Err(Error::Singular(format!(
            "eliminated block of {ne} nodes is singular (smallest pivot {min_pivot:.3e})"
        )));
    }
    let x = lu
        .solve(&y_er)
        .ok_or_else(|| Error::Singular("eliminated block".into()))?;
    Ok(y_rr - y_re * x)
}
