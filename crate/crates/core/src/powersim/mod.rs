//! Classical multi-machine transient stability simulation.
//!
//! Each machine is a constant EMF behind its transient reactance x'_d.
//! Loads (net of renewable injections) become constant admittances at the
//! pre-fault voltage, and the network is Kron-reduced to the machine
//! internal nodes for each of three topologies: pre-fault, fault-on (the
//! faulted bus shorted to ground) and post-fault (one line tripped). The
//! swing equations
//!
//! ```text
//! dδ_i/dt  = Δω_i
//! (2H_i/ω_s) dΔω_i/dt = P_m,i − P_e,i(δ) − D_i Δω_i / ω_s
//! ```
//!
//! are integrated with fixed-step RK4. A run is unstable once the largest
//! pairwise rotor-angle difference exceeds the contingency's threshold
//! (2π by default). The critical clearing time (CCT) is found by bisection
//! on the clearing time, and the stability margin is `CCT − t_fct`.

mod case;
mod cct;
mod dynamics;
mod evaluator;
mod network;

pub use case::{
    Bus, BusKind, CctSearch, Contingency, GridCase, Injection, Line, Load, Machine, MachineKind,
};
pub use cct::{compute_cct, tsm, CctResult, Censoring, Margin};
pub use dynamics::{
    is_stable, simulate, solve_prefault, OperatingPoint, PreparedSystem, TrajectoryResult, Verdict,
};
pub use evaluator::GridEvaluator;
pub use network::{kron_reduce, PowerFlowSolution, C64};
