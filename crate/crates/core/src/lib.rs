//! Decentralized merging control for connected automated vehicles.
//!
//! Each vehicle tracks an unconstrained optimal reference trajectory and
//! filters it through a per-step quadratic program whose rows are control
//! barrier function conditions for rear-end and lateral merging safety, plus
//! feasibility rows that keep those conditions satisfiable under the braking
//! limit.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= tol, "{} = {a} differs from {b} by more than {tol}", stringify!($a));
    }};
}

pub mod constraints;
pub mod error;
pub mod io;
pub mod qp;
pub mod reference;
pub mod sim;
pub mod vehicle;

pub use constraints::{BarrierSnapshot, LinearRow, RowTag, Sense};
pub use error::{ConfigError, Error, QpError, ReferenceError, Result};
pub use qp::{feasible_interval_u, solve_qp, Interval, QpProblem, QpSolution, QpStatus};
pub use reference::{eval_reference, solve_reference, ReferencePoint, ReferenceTrajectory};
pub use vehicle::{integrate_step, integrate_step_with, Discretization, Lane, NeighborView, SimParams, VehicleId, VehicleState};
pub use sim::{run, Mode, RunSummary, ScenarioConfig, Simulation, StepRecord};
