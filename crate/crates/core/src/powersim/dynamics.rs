//! Classical-model operating point and swing-equation integration.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::case::{Contingency, GridCase, MachineKind};
use super::network::{kron_reduce, power_flow, schedule, ybus, PowerFlowSolution, C64};
use crate::error::{Error, Result};

/// Pre-fault steady state in the classical model.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    pub power_flow: PowerFlowSolution,
    /// Internal EMF per machine; the bus voltage for infinite machines.
    pub emf: Vec<C64>,
    /// Mechanical power per machine (p.u.), equal to the pre-fault
    /// electrical output of the reduced network at the initial angles.
    pub pm: Vec<f64>,
    /// Pre-fault admittance reduced to the machine nodes.
    pub y_reduced: DMatrix<C64>,
    load_admittance: Vec<C64>,
}

impl OperatingPoint {
    pub fn rotor_angles(&self) -> Vec<f64> {
        self.emf.iter().map(|e| e.arg()).collect()
    }
}

/// Augmented admittance: buses plus one internal node per classical machine,
/// with loads as shunt admittances. Returns the matrix and the node of each
/// machine.
fn augmented(
    case: &GridCase,
    load_admittance: &[C64],
    skip_line: Option<&str>,
) -> Result<(DMatrix<C64>, Vec<usize>)> {
    let n = case.buses.len();
    let n_internal = case
        .machines
        .iter()
        .filter(|m| m.kind == MachineKind::Classical)
        .count();
    let base = ybus(case, skip_line)?;
    let mut y = DMatrix::<C64>::zeros(n + n_internal, n + n_internal);
    y.view_mut((0, 0), (n, n)).copy_from(&base);
    for (i, yl) in load_admittance.iter().enumerate() {
        y[(i, i)] += yl;
    }
    let mut nodes = Vec::with_capacity(case.machines.len());
    let mut next = n;
    for m in &case.machines {
        let b = case.bus_index(m.bus)?;
        match m.kind {
            MachineKind::Classical => {
                let ym = C64::new(0.0, -1.0 / m.xd_prime);
                y[(next, next)] += ym;
                y[(b, b)] += ym;
                y[(next, b)] -= ym;
                y[(b, next)] -= ym;
                nodes.push(next);
                next += 1;
            }
            MachineKind::Infinite => nodes.push(b),
        }
    }
    Ok((y, nodes))
}

/// Reduces the augmented network to the machine nodes, with `fault_bus`
/// (if any) shorted to ground.
fn reduced(
    case: &GridCase,
    load_admittance: &[C64],
    skip_line: Option<&str>,
    fault_bus: Option<u32>,
) -> Result<DMatrix<C64>> {
    let (mut y, mut nodes) = augmented(case, load_admittance, skip_line)?;
    if let Some(fb) = fault_bus {
        // a bolted fault pins the bus voltage to zero, which removes its
        // row and column from the nodal equations
        let f = case.bus_index(fb)?;
        y = y.remove_row(f).remove_column(f);
        for v in nodes.iter_mut() {
            if *v > f {
                *v -= 1;
            }
        }
    }
    kron_reduce(&y, &nodes)
}

/// Electrical power output of every machine for the given EMFs.
fn electrical_power(y: &DMatrix<C64>, emf: &[C64]) -> Vec<f64> {
    (0..emf.len())
        .map(|i| {
            let current: C64 = (0..emf.len()).map(|j| y[(i, j)] * emf[j]).sum();
            (emf[i] * current.conj()).re
        })
        .collect()
}

/// Newton power flow for the realization `x`, then internal EMFs behind
/// x'_d and mechanical powers.
pub fn solve_prefault(case: &GridCase, x: &[f64]) -> Result<OperatingPoint> {
    let sched = schedule(case, x)?;
    let y = ybus(case, None)?;
    let pf = power_flow(case, &y, &sched)?;
    let load_admittance: Vec<C64> = sched
        .load
        .iter()
        .zip(&pf.voltages)
        .map(|(s, v)| s.conj() / v.norm_sqr())
        .collect();
    let mut emf = Vec::with_capacity(case.machines.len());
    for m in &case.machines {
        let b = case.bus_index(m.bus)?;
        let v = pf.voltages[b];
        match m.kind {
            MachineKind::Classical => {
                // generator output = network injection + local net load
                let s_gen = pf.injections[b] + sched.load[b];
                let current = (s_gen / v).conj();
                emf.push(v + C64::new(0.0, m.xd_prime) * current);
            }
            MachineKind::Infinite => emf.push(v),
        }
    }
    let y_reduced = reduced(case, &load_admittance, None, None)?;
    let pm = electrical_power(&y_reduced, &emf);
    Ok(OperatingPoint {
        power_flow: pf,
        emf,
        pm,
        y_reduced,
        load_admittance,
    })
}

/// `E_i E_j G_ij` and `E_i E_j B_ij` of one network topology, row-major.
#[derive(Debug, Clone)]
struct Phase {
    a: Vec<f64>,
    c: Vec<f64>,
}

impl Phase {
    fn new(y: &DMatrix<C64>, emag: &[f64]) -> Self {
        let n = emag.len();
        let mut a = vec![0.0; n * n];
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = emag[i] * emag[j] * y[(i, j)].re;
                c[i * n + j] = emag[i] * emag[j] * y[(i, j)].im;
            }
        }
        Phase { a, c }
    }
}

/// Rotor-angle trajectories of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub time: Vec<f64>,
    /// `angles[k][t]`: rotor angle (rad) of machine `k` at `time[t]`.
    pub angles: Vec<Vec<f64>>,
    /// `speeds[k][t]`: speed deviation (rad/s) of machine `k`.
    pub speeds: Vec<Vec<f64>>,
    pub max_angle_difference: Vec<f64>,
    pub stable: bool,
    /// The state became non-finite; such runs are reported unstable.
    pub blew_up: bool,
}

/// A realization and contingency ready for repeated integration at
/// different clearing times.
#[derive(Debug, Clone)]
pub struct PreparedSystem {
    operating_point: OperatingPoint,
    h: Vec<f64>,
    d: Vec<f64>,
    fixed: Vec<bool>,
    omega_s: f64,
    delta0: Vec<f64>,
    pre: Phase,
    fault: Phase,
    post: Phase,
    t_fault_on: f64,
    duration: f64,
    step: f64,
    threshold: f64,
}

/// Outcome of a run without trajectory storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub stable: bool,
    pub blew_up: bool,
}

impl PreparedSystem {
    pub fn new(case: &GridCase, x: &[f64], ctg: &Contingency) -> Result<Self> {
        ctg.check_topology(case)?;
        let op = solve_prefault(case, x)?;
        let emag: Vec<f64> = op.emf.iter().map(|e| e.norm()).collect();
        let y_fault = reduced(case, &op.load_admittance, None, Some(ctg.fault_bus))?;
        let y_post = reduced(case, &op.load_admittance, Some(&ctg.tripped_line), None)?;
        let pre = Phase::new(&op.y_reduced, &emag);
        let fault = Phase::new(&y_fault, &emag);
        let post = Phase::new(&y_post, &emag);
        Ok(PreparedSystem {
            h: case.machines.iter().map(|m| m.h).collect(),
            d: case.machines.iter().map(|m| m.d).collect(),
            fixed: case
                .machines
                .iter()
                .map(|m| m.kind == MachineKind::Infinite)
                .collect(),
            omega_s: case.omega_s(),
            delta0: op.rotor_angles(),
            operating_point: op,
            pre,
            fault,
            post,
            t_fault_on: ctg.t_fault_on,
            duration: ctg.sim_duration,
            step: ctg.step,
            threshold: ctg.angle_threshold,
        })
    }

    pub fn operating_point(&self) -> &OperatingPoint {
        &self.operating_point
    }

    /// Stability at clearing time `t_fct` without storing the trajectory.
    pub fn verdict(&self, t_fct: f64) -> Verdict {
        self.run(t_fct, None)
    }

    pub fn trajectory(&self, t_fct: f64) -> TrajectoryResult {
        let n = self.h.len();
        let mut rec = Recorder {
            time: Vec::new(),
            angles: vec![Vec::new(); n],
            speeds: vec![Vec::new(); n],
            max_diff: Vec::new(),
        };
        let v = self.run(t_fct, Some(&mut rec));
        TrajectoryResult {
            time: rec.time,
            angles: rec.angles,
            speeds: rec.speeds,
            max_angle_difference: rec.max_diff,
            stable: v.stable,
            blew_up: v.blew_up,
        }
    }

    fn run(&self, t_fct: f64, mut rec: Option<&mut Recorder>) -> Verdict {
        let n = self.h.len();
        let mut st = State {
            delta: self.delta0.clone(),
            omega: vec![0.0; n],
        };
        let mut ws = Workspace::new(n);
        if let Some(r) = rec.as_deref_mut() {
            r.push(0.0, &st);
        }
        let t_on = self.t_fault_on.min(self.duration);
        let t_clear = (self.t_fault_on + t_fct.max(0.0)).min(self.duration);
        let phases = [
            (0.0, t_on, &self.pre),
            (t_on, t_clear, &self.fault),
            (t_clear, self.duration, &self.post),
        ];
        for (ta, tb, phase) in phases {
            if tb <= ta {
                continue;
            }
            let steps = (((tb - ta) / self.step) - 1e-9).ceil().max(1.0) as usize;
            for k in 0..steps {
                let t = ta + k as f64 * self.step;
                let t_next = if k + 1 == steps { tb } else { t + self.step };
                self.rk4(phase, &mut st, t_next - t, &mut ws);
                let spread = max_spread(&st.delta);
                if let Some(r) = rec.as_deref_mut() {
                    r.push(t_next, &st);
                }
                if !spread.is_finite() || st.omega.iter().any(|w| !w.is_finite()) {
                    return Verdict {
                        stable: false,
                        blew_up: true,
                    };
                }
                if spread > self.threshold {
                    return Verdict {
                        stable: false,
                        blew_up: false,
                    };
                }
            }
        }
        Verdict {
            stable: true,
            blew_up: false,
        }
    }

    fn derivative(&self, phase: &Phase, st: &State, out: &mut State, ws: &mut Workspace) {
        let n = st.delta.len();
        for i in 0..n {
            let (s, c) = st.delta[i].sin_cos();
            ws.s[i] = s;
            ws.c[i] = c;
        }
        for i in 0..n {
            out.delta[i] = st.omega[i];
            if self.fixed[i] {
                out.delta[i] = 0.0;
                out.omega[i] = 0.0;
                continue;
            }
            let row_a = &phase.a[i * n..(i + 1) * n];
            let row_c = &phase.c[i * n..(i + 1) * n];
            let (mut s1, mut s2) = (0.0, 0.0);
            for j in 0..n {
                s1 += row_a[j] * ws.c[j] - row_c[j] * ws.s[j];
                s2 += row_a[j] * ws.s[j] + row_c[j] * ws.c[j];
            }
            // E_i E_j (G cos δ_ij + B sin δ_ij) summed over j
            let pe = ws.c[i] * s1 + ws.s[i] * s2;
            let pm = self.operating_point.pm[i];
            out.omega[i] = (pm - pe - self.d[i] * st.omega[i] / self.omega_s) * self.omega_s
                / (2.0 * self.h[i]);
        }
    }

    fn rk4(&self, phase: &Phase, st: &mut State, h: f64, ws: &mut Workspace) {
        let n = st.delta.len();
        let mut k = std::mem::take(&mut ws.k);
        let mut tmp = std::mem::take(&mut ws.tmp);
        self.derivative(phase, st, &mut k[0], ws);
        for (stage, frac) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
            let (done, rest) = k.split_at_mut(stage);
            let prev = &done[stage - 1];
            for i in 0..n {
                tmp.delta[i] = st.delta[i] + frac * h * prev.delta[i];
                tmp.omega[i] = st.omega[i] + frac * h * prev.omega[i];
            }
            self.derivative(phase, &tmp, &mut rest[0], ws);
        }
        for i in 0..n {
            st.delta[i] += h / 6.0
                * (k[0].delta[i] + 2.0 * k[1].delta[i] + 2.0 * k[2].delta[i] + k[3].delta[i]);
            st.omega[i] += h / 6.0
                * (k[0].omega[i] + 2.0 * k[1].omega[i] + 2.0 * k[2].omega[i] + k[3].omega[i]);
        }
        ws.k = k;
        ws.tmp = tmp;
    }
}

#[derive(Debug, Clone, Default)]
struct State {
    delta: Vec<f64>,
    omega: Vec<f64>,
}

impl State {
    fn zeros(n: usize) -> Self {
        State {
            delta: vec![0.0; n],
            omega: vec![0.0; n],
        }
    }
}

struct Workspace {
    s: Vec<f64>,
    c: Vec<f64>,
    k: [State; 4],
    tmp: State,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            s: vec![0.0; n],
            c: vec![0.0; n],
            k: [
                State::zeros(n),
                State::zeros(n),
                State::zeros(n),
                State::zeros(n),
            ],
            tmp: State::zeros(n),
        }
    }
}

struct Recorder {
    time: Vec<f64>,
    angles: Vec<Vec<f64>>,
    speeds: Vec<Vec<f64>>,
    max_diff: Vec<f64>,
}

impl Recorder {
    fn push(&mut self, t: f64, st: &State) {
        self.time.push(t);
        for (k, (d, w)) in st.delta.iter().zip(&st.omega).enumerate() {
            self.angles[k].push(*d);
            self.speeds[k].push(*w);
        }
        self.max_diff.push(max_spread(&st.delta));
    }
}

fn max_spread(delta: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &d in delta {
        if d.is_nan() {
            return f64::NAN;
        }
        lo = lo.min(d);
        hi = hi.max(d);
    }
    hi - lo
}

/// Integrates the swing equations through the pre-fault, fault-on and
/// post-fault networks and records the trajectories.
pub fn simulate(case: &GridCase, x: &[f64], ctg: &Contingency) -> Result<TrajectoryResult> {
    ctg.validate(case)?;
    let sys = PreparedSystem::new(case, x, ctg)?;
    Ok(sys.trajectory(ctg.t_fct))
}

/// Stability at the contingency's clearing time, without trajectories.
pub fn is_stable(case: &GridCase, x: &[f64], ctg: &Contingency) -> Result<bool> {
    ctg.validate(case)?;
    let sys = PreparedSystem::new(case, x, ctg)?;
    Ok(sys.verdict(ctg.t_fct).stable)
}

pub(crate) fn wrap_at(fct: f64) -> impl FnOnce(Error) -> Error {
    move |e| Error::Simulation {
        fct,
        source: Box::new(e),
    }
}
