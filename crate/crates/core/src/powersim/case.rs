use std::collections::{BTreeSet, HashMap, VecDeque};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::WindTurbineCurve;

/// Power-flow role of a bus. Voltages in p.u., powers in p.u. of the base MVA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BusKind {
    Slack {
        v: f64,
        #[serde(default)]
        angle: f64,
    },
    Pv {
        v: f64,
        p_gen: f64,
    },
    Pq,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    #[serde(flatten)]
    pub kind: BusKind,
}

/// π-model branch. `b` is the total line charging susceptance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from: u32,
    pub to: u32,
    #[serde(default)]
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default = "default_true")]
    pub in_service: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MachineKind {
    /// Constant EMF behind transient reactance with swing dynamics.
    #[default]
    Classical,
    /// Fixed voltage and angle at its bus; inertia and reactance are ignored.
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub bus: u32,
    /// Inertia constant (s) on the system base.
    pub h: f64,
    /// Transient reactance x'_d (p.u.).
    pub xd_prime: f64,
    /// Damping (p.u. power per p.u. speed deviation).
    #[serde(default)]
    pub d: f64,
    #[serde(default)]
    pub kind: MachineKind,
}

/// Static load, turned into a constant impedance at the pre-fault voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: u32,
    pub p: f64,
    #[serde(default)]
    pub q: f64,
}

/// How one uncertain input enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Injection {
    /// Multiplies both P and Q of `loads[load]` by the input value.
    LoadScale { input: usize, load: usize },
    /// Input is a wind speed (m/s); `units` identical farms with `curve`
    /// inject at unity power factor.
    Wind {
        input: usize,
        bus: u32,
        curve: WindTurbineCurve,
        #[serde(default = "one")]
        units: f64,
    },
    /// Input is an active power (MW), multiplied by `scale`.
    Solar {
        input: usize,
        bus: u32,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Injection {
    pub fn input(&self) -> usize {
        match *self {
            Injection::LoadScale { input, .. }
            | Injection::Wind { input, .. }
            | Injection::Solar { input, .. } => input,
        }
    }
}

/// Classical multi-machine network with its uncertain-input map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCase {
    pub name: String,
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    #[serde(default = "default_base")]
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub machines: Vec<Machine>,
    #[serde(default)]
    pub loads: Vec<Load>,
    #[serde(default)]
    pub injections: Vec<Injection>,
}

fn default_frequency() -> f64 {
    60.0
}
fn default_base() -> f64 {
    100.0
}

/// A three-phase bolted fault at `fault_bus`, cleared after `t_fct` seconds
/// by tripping `tripped_line`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contingency {
    #[serde(default)]
    pub name: String,
    pub fault_bus: u32,
    pub tripped_line: String,
    /// Fault inception time (s).
    #[serde(default)]
    pub t_fault_on: f64,
    /// Fault clearing time (s), measured from inception.
    pub t_fct: f64,
    #[serde(default = "default_duration")]
    pub sim_duration: f64,
    /// RK4 step (s).
    #[serde(default = "default_step")]
    pub step: f64,
    /// Maximum pairwise rotor-angle difference (rad) above which the system
    /// is declared unstable.
    #[serde(default = "default_threshold")]
    pub angle_threshold: f64,
}

fn default_duration() -> f64 {
    12.0
}
fn default_step() -> f64 {
    1e-3
}
fn default_threshold() -> f64 {
    2.0 * PI
}

impl Contingency {
    pub fn new(fault_bus: u32, tripped_line: impl Into<String>, t_fct: f64) -> Self {
        Contingency {
            name: String::new(),
            fault_bus,
            tripped_line: tripped_line.into(),
            t_fault_on: 0.0,
            t_fct,
            sim_duration: default_duration(),
            step: default_step(),
            angle_threshold: default_threshold(),
        }
    }

    pub fn with_fct(&self, t_fct: f64) -> Self {
        Contingency {
            t_fct,
            ..self.clone()
        }
    }

    /// Checks timing fields and that the contingency fits `case`.
    pub fn validate(&self, case: &GridCase) -> Result<()> {
        if !(self.t_fct > 0.0 && self.t_fct.is_finite()) {
            return Err(Error::config(format!(
                "t_fct must be > 0, got {}",
                self.t_fct
            )));
        }
        if !(self.t_fault_on >= 0.0) {
            return Err(Error::config("t_fault_on must be >= 0"));
        }
        if !(self.sim_duration > self.t_fault_on + self.t_fct && self.sim_duration.is_finite()) {
            return Err(Error::config(format!(
                "sim_duration {} must exceed t_fault_on + t_fct = {}",
                self.sim_duration,
                self.t_fault_on + self.t_fct
            )));
        }
        if !(self.step > 0.0 && self.step < self.sim_duration) {
            return Err(Error::config(format!(
                "invalid integration step {}",
                self.step
            )));
        }
        if !(self.angle_threshold > 0.0) {
            return Err(Error::config("angle_threshold must be > 0"));
        }
        self.check_topology(case)
    }

    pub(crate) fn check_topology(&self, case: &GridCase) -> Result<()> {
        case.bus_index(self.fault_bus)?;
        let line = case.line(&self.tripped_line)?;
        if !line.in_service {
            return Err(Error::config(format!(
                "tripped line '{}' is already out of service",
                line.id
            )));
        }
        if line.from != self.fault_bus && line.to != self.fault_bus {
            return Err(Error::config(format!(
                "tripped line '{}' is not adjacent to fault bus {}",
                line.id, self.fault_bus
            )));
        }
        if case
            .machines
            .iter()
            .any(|m| m.kind == MachineKind::Infinite && m.bus == self.fault_bus)
        {
            return Err(Error::config(format!(
                "fault bus {} holds an infinite machine",
                self.fault_bus
            )));
        }
        Ok(())
    }
}

/// Bracket and tolerance for the critical-clearing-time bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CctSearch {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl Default for CctSearch {
    /// `[0, 0.5]` s with a quarter-cycle tolerance at 60 Hz.
    fn default() -> Self {
        CctSearch {
            lo: 0.0,
            hi: 0.5,
            tol: 1.0 / 240.0,
        }
    }
}

impl CctSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo >= 0.0 && self.lo <= self.hi && self.hi.is_finite() && self.tol > 0.0) {
            return Err(Error::config(format!(
                "CCT search needs 0 <= lo <= hi and tol > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

impl GridCase {
    pub fn from_json(text: &str) -> Result<Self> {
        let case: GridCase = serde_json::from_str(text)?;
        case.validate()?;
        Ok(case)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read grid case {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn omega_s(&self) -> f64 {
        2.0 * PI * self.frequency_hz
    }

    pub fn cycles_to_seconds(&self, cycles: f64) -> f64 {
        cycles / self.frequency_hz
    }

    pub fn seconds_to_cycles(&self, seconds: f64) -> f64 {
        seconds * self.frequency_hz
    }

    pub fn bus_index(&self, id: u32) -> Result<usize> {
        self.buses
            .iter()
            .position(|b| b.id == id)
            .ok_or_else(|| Error::config(format!("unknown bus {id}")))
    }

    pub fn line(&self, id: &str) -> Result<&Line> {
        self.lines
            .iter()
            .find(|l| l.id == id)
            .ok_or_else(|| Error::config(format!("unknown line '{id}'")))
    }

    /// Number of input dimensions the injection map reads.
    pub fn input_dim(&self) -> usize {
        self.injections
            .iter()
            .map(|i| i.input() + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz > 0.0 && self.base_mva > 0.0) {
            return Err(Error::config("frequency and base MVA must be positive"));
        }
        if self.buses.is_empty() {
            return Err(Error::config("grid case has no buses"));
        }
        let mut ids = BTreeSet::new();
        for b in &self.buses {
            if !ids.insert(b.id) {
                return Err(Error::config(format!("duplicate bus id {}", b.id)));
            }
            match b.kind {
                BusKind::Slack { v, .. } | BusKind::Pv { v, .. } if !(v > 0.0) => {
                    return Err(Error::config(format!(
                        "bus {} voltage setpoint must be > 0",
                        b.id
                    )));
                }
                _ => {}
            }
        }
        let slack = self
            .buses
            .iter()
            .filter(|b| matches!(b.kind, BusKind::Slack { .. }))
            .count();
        if slack != 1 {
            return Err(Error::config(format!(
                "need exactly one slack bus, found {slack}"
            )));
        }
        let mut line_ids = BTreeSet::new();
        for l in &self.lines {
            if !line_ids.insert(l.id.as_str()) {
                return Err(Error::config(format!("duplicate line id '{}'", l.id)));
            }
            self.bus_index(l.from)?;
            self.bus_index(l.to)?;
            if l.from == l.to {
                return Err(Error::config(format!("line '{}' is a self loop", l.id)));
            }
            if l.r == 0.0 && l.x == 0.0 {
                return Err(Error::config(format!("line '{}' has zero impedance", l.id)));
            }
        }
        let mut machine_buses = HashMap::new();
        for (k, m) in self.machines.iter().enumerate() {
            let i = self.bus_index(m.bus)?;
            if machine_buses.insert(m.bus, k).is_some() {
                return Err(Error::config(format!(
                    "bus {} has more than one machine",
                    m.bus
                )));
            }
            if matches!(self.buses[i].kind, BusKind::Pq) {
                return Err(Error::config(format!(
                    "machine at bus {} which is a PQ bus",
                    m.bus
                )));
            }
            if m.kind == MachineKind::Classical && !(m.h > 0.0 && m.xd_prime > 0.0) {
                return Err(Error::config(format!(
                    "machine at bus {} needs H > 0 and x'_d > 0",
                    m.bus
                )));
            }
            if !(m.d >= 0.0) {
                return Err(Error::config(format!(
                    "machine at bus {} has negative damping",
                    m.bus
                )));
            }
        }
        for b in &self.buses {
            if !matches!(b.kind, BusKind::Pq) && !machine_buses.contains_key(&b.id) {
                return Err(Error::config(format!(
                    "generator bus {} has no machine",
                    b.id
                )));
            }
        }
        if !self
            .machines
            .iter()
            .any(|m| m.kind == MachineKind::Classical)
        {
            return Err(Error::config("grid case has no classical machine"));
        }
        for l in &self.loads {
            self.bus_index(l.bus)?;
        }
        for inj in &self.injections {
            match *inj {
                Injection::LoadScale { load, .. } => {
                    if load >= self.loads.len() {
                        return Err(Error::config(format!(
                            "injection refers to missing load {load}"
                        )));
                    }
                }
                Injection::Wind {
                    bus, curve, units, ..
                } => {
                    self.bus_index(bus)?;
                    curve.validate()?;
                    if !(units >= 0.0) {
                        return Err(Error::config("wind units must be >= 0"));
                    }
                }
                Injection::Solar { bus, .. } => {
                    self.bus_index(bus)?;
                }
            }
        }
        self.check_connected()
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for l in self.lines.iter().filter(|l| l.in_service) {
            let (a, b) = (self.bus_index(l.from)?, self.bus_index(l.to)?);
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(Error::config(format!(
                "network is not connected: bus {} unreachable",
                self.buses[i].id
            ))),
            None => Ok(()),
        }
    }

    /// Single machine against an infinite bus through two parallel lines.
    ///
    /// Bus 1 holds a 0.9 p.u. classical machine (H = 5 s, x'_d = 0.3) at
    /// 1.0 p.u. voltage; bus 2 is the infinite bus. Each line has x = 0.6.
    /// The reference contingency faults bus 1 and trips line `L1`.
    pub fn smib() -> Self {
        GridCase {
            name: "smib".into(),
            frequency_hz: 60.0,
            base_mva: 100.0,
            buses: vec![
                Bus {
                    id: 1,
                    kind: BusKind::Pv { v: 1.0, p_gen: 0.9 },
                },
                Bus {
                    id: 2,
                    kind: BusKind::Slack { v: 1.0, angle: 0.0 },
                },
            ],
            lines: vec![smib_line("L1"), smib_line("L2")],
            machines: vec![
                Machine {
                    bus: 1,
                    h: 5.0,
                    xd_prime: 0.3,
                    d: 0.0,
                    kind: MachineKind::Classical,
                },
                Machine {
                    bus: 2,
                    h: 0.0,
                    xd_prime: 0.0,
                    d: 0.0,
                    kind: MachineKind::Infinite,
                },
            ],
            loads: Vec::new(),
            injections: Vec::new(),
        }
    }

    pub fn smib_contingency() -> Contingency {
        Contingency {
            name: "bus 1 fault, trip L1".into(),
            ..Contingency::new(1, "L1", 0.1)
        }
    }

    /// WSCC 3-machine, 9-bus system (100 MVA, 60 Hz) with classical machines.
    ///
    /// Uncertain inputs, in order: scaling factors of the loads at buses 5, 6
    /// and 8, then the wind speed (m/s) at a wind farm on bus 5.
    pub fn wscc9() -> Self {
        let line = |id: &str, from, to, r, x, b| Line {
            id: id.into(),
            from,
            to,
            r,
            x,
            b,
            in_service: true,
        };
        let machine = |bus, h, xd_prime| Machine {
            bus,
            h,
            xd_prime,
            d: 0.0,
            kind: MachineKind::Classical,
        };
        let mut buses = vec![
            Bus {
                id: 1,
                kind: BusKind::Slack {
                    v: 1.04,
                    angle: 0.0,
                },
            },
            Bus {
                id: 2,
                kind: BusKind::Pv {
                    v: 1.025,
                    p_gen: 1.63,
                },
            },
            Bus {
                id: 3,
                kind: BusKind::Pv {
                    v: 1.025,
                    p_gen: 0.85,
                },
            },
        ];
        buses.extend((4..=9).map(|id| Bus {
            id,
            kind: BusKind::Pq,
        }));
        GridCase {
            name: "wscc9".into(),
            frequency_hz: 60.0,
            base_mva: 100.0,
            buses,
            lines: vec![
                line("1-4", 1, 4, 0.0, 0.0576, 0.0),
                line("4-5", 4, 5, 0.010, 0.085, 0.176),
                line("4-6", 4, 6, 0.017, 0.092, 0.158),
                line("5-7", 5, 7, 0.032, 0.161, 0.306),
                line("6-9", 6, 9, 0.039, 0.170, 0.358),
                line("7-8", 7, 8, 0.0085, 0.072, 0.149),
                line("8-9", 8, 9, 0.0119, 0.1008, 0.209),
                line("2-7", 2, 7, 0.0, 0.0625, 0.0),
                line("3-9", 3, 9, 0.0, 0.0586, 0.0),
            ],
            machines: vec![
                machine(1, 23.64, 0.0608),
                machine(2, 6.4, 0.1198),
                machine(3, 3.01, 0.1813),
            ],
            loads: vec![
                Load {
                    bus: 5,
                    p: 1.25,
                    q: 0.5,
                },
                Load {
                    bus: 6,
                    p: 0.9,
                    q: 0.3,
                },
                Load {
                    bus: 8,
                    p: 1.0,
                    q: 0.35,
                },
            ],
            injections: vec![
                Injection::LoadScale { input: 0, load: 0 },
                Injection::LoadScale { input: 1, load: 1 },
                Injection::LoadScale { input: 2, load: 2 },
                Injection::Wind {
                    input: 3,
                    bus: 5,
                    curve: WindTurbineCurve::with_rated_power(50.0),
                    units: 1.0,
                },
            ],
        }
    }

    /// Bolted fault at bus 7 cleared by tripping line 5-7 after 0.13 s,
    /// simulated for 5 s. Under [`GridCase::wscc9_uncertainty`] about 1% of
    /// realizations are unstable.
    pub fn wscc9_contingency() -> Contingency {
        Contingency {
            name: "bus 7 fault, trip 5-7".into(),
            sim_duration: 5.0,
            ..Contingency::new(7, "5-7", 0.13)
        }
    }
}

fn smib_line(id: &str) -> Line {
    Line {
        id: id.into(),
        from: 1,
        to: 2,
        r: 0.0,
        x: 0.6,
        b: 0.0,
        in_service: true,
    }
}
