//! Vehicle state, model parameters and longitudinal double-integrator dynamics.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::ConfigError;

/// Stable identity of a CAV, assigned in order of sampled arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VehicleId(pub u64);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The two roads that join at the merging point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lane {
    Main,
    Merging,
}

impl Lane {
    pub fn as_str(self) -> &'static str {
        match self {
            Lane::Main => "main",
            Lane::Merging => "merging",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "main" => Some(Lane::Main),
            "merging" => Some(Lane::Merging),
            _ => None,
        }
    }
}

/// How positions and speeds are advanced over one step of constant control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// `x' = x + v dt`, `v' = v + u dt`. Barriers that are linear in the
    /// state (gap, speeds) then obey their discrete CBF condition exactly.
    #[default]
    ForwardEuler,
    /// Exact solution of the double integrator under zero-order hold:
    /// `x' = x + v dt + u dt^2 / 2`.
    ZeroOrderHold,
}

/// Model and controller parameters shared by every CAV in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Control-zone length from each road origin to the merging point, m.
    pub zone_length: f64,
    /// Reaction time in the speed-dependent safe distance, s.
    pub reaction_time: f64,
    /// Standstill gap, m.
    pub standstill_gap: f64,
    /// Minimum acceleration, common to all vehicles, m/s^2.
    pub u_min: f64,
    /// Default maximum acceleration assigned to new vehicles, m/s^2.
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Controller step, s.
    pub dt: f64,
    /// Travel-time weight of the reference problem.
    pub beta: f64,
    /// Class-K gain of the rear-end CBF and its feasibility row.
    pub k_rear: f64,
    /// Class-K gain of the safe-merging CBF and its feasibility row.
    pub k_merge: f64,
    /// CLF convergence rate.
    pub clf_rate: f64,
    /// Weight on the squared CLF relaxation in the QP objective.
    pub clf_weight: f64,
    /// Gain of the speed-limit CBFs.
    pub k_speed: f64,
    /// Add the speed-limit CBF rows to every QP.
    pub speed_limit_rows: bool,
    pub discretization: Discretization,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            zone_length: 400.0,
            reaction_time: 1.8,
            standstill_gap: 10.0,
            u_min: -2.0,
            u_max: 3.0,
            v_min: 0.0,
            v_max: 30.0,
            dt: 0.05,
            beta: 1.0,
            k_rear: 1.0,
            k_merge: 1.0,
            clf_rate: 10.0,
            clf_weight: 1.0,
            k_speed: 1.0,
            speed_limit_rows: true,
            discretization: Discretization::ForwardEuler,
        }
    }
}

impl SimParams {
    /// Reaction-time slope of the merging barrier, `phi / L`.
    pub fn merge_slope(&self) -> f64 {
        self.reaction_time / self.zone_length
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn finite(key: &str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(key, "must be finite"))
            }
        }
        for (k, v) in [
            ("zone_length", self.zone_length),
            ("reaction_time", self.reaction_time),
            ("standstill_gap", self.standstill_gap),
            ("u_min", self.u_min),
            ("u_max", self.u_max),
            ("v_min", self.v_min),
            ("v_max", self.v_max),
            ("dt", self.dt),
            ("beta", self.beta),
            ("k_rear", self.k_rear),
            ("k_merge", self.k_merge),
            ("clf_rate", self.clf_rate),
            ("clf_weight", self.clf_weight),
            ("k_speed", self.k_speed),
        ] {
            finite(k, v)?;
        }
        let check = |ok: bool, key: &str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::new(key, reason))
            }
        };
        check(self.zone_length > 0.0, "zone_length", "must be > 0")?;
        check(self.reaction_time > 0.0, "reaction_time", "must be > 0")?;
        check(self.standstill_gap >= 0.0, "standstill_gap", "must be >= 0")?;
        check(self.dt > 0.0, "dt", "must be > 0")?;
        check(
            self.u_min < 0.0,
            "u_min",
            "must be < 0 (feasibility rows need a braking authority)",
        )?;
        check(self.u_max > 0.0, "u_max", "must be > 0")?;
        check(self.v_min >= 0.0, "v_min", "must be >= 0")?;
        check(self.v_max > self.v_min, "v_max", "must exceed v_min")?;
        check(self.beta >= 0.0, "beta", "must be >= 0")?;
        check(self.k_rear > 0.0, "k_rear", "must be > 0")?;
        check(self.k_merge > 0.0, "k_merge", "must be > 0")?;
        check(self.clf_rate > 0.0, "clf_rate", "must be > 0")?;
        check(self.clf_weight > 0.0, "clf_weight", "must be > 0")?;
        check(self.k_speed > 0.0, "k_speed", "must be > 0")?;
        Ok(())
    }
}

/// Longitudinal state of one CAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: VehicleId,
    pub lane: Lane,
    /// Distance from the lane origin, m.
    pub x: f64,
    /// Speed, m/s.
    pub v: f64,
    /// Last applied acceleration, m/s^2.
    pub u: f64,
    /// This vehicle's maximum acceleration, m/s^2.
    pub u_max: f64,
    /// Control-zone entry time, s.
    pub t0: f64,
    /// Position in the coordinator's FIFO queue.
    pub fifo_index: usize,
}

impl VehicleState {
    pub fn new(id: VehicleId, lane: Lane, x: f64, v: f64) -> Self {
        Self {
            id,
            lane,
            x,
            v,
            u: 0.0,
            u_max: SimParams::default().u_max,
            t0: 0.0,
            fifo_index: 0,
        }
    }
}

/// The predecessors a vehicle's constraints refer to.
///
/// `pred_physical` is the nearest vehicle ahead on the same road, `pred_fifo`
/// the vehicle immediately ahead in the crossing order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborView {
    pub pred_physical: Option<VehicleState>,
    pub pred_fifo: Option<VehicleState>,
    pub pred_fifo_same_lane: bool,
}

impl NeighborView {
    pub fn alone() -> Self {
        Self::default()
    }

    /// Builds the view from the two candidates, deriving the same-lane flag.
    pub fn new(pred_physical: Option<VehicleState>, pred_fifo: Option<VehicleState>) -> Self {
        let same = match (&pred_physical, &pred_fifo) {
            (Some(p), Some(f)) => p.id == f.id,
            _ => false,
        };
        Self {
            pred_physical,
            pred_fifo,
            pred_fifo_same_lane: same,
        }
    }

    /// The FIFO predecessor when it constrains through the merging barrier,
    /// i.e. when it is not also the physical predecessor.
    pub fn merge_pred(&self) -> Option<&VehicleState> {
        if self.pred_fifo_same_lane {
            None
        } else {
            self.pred_fifo.as_ref()
        }
    }
}

/// Result of one integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrated {
    pub state: VehicleState,
    /// The speed would have become negative and was held at zero.
    pub clamped: bool,
}

/// Advances one vehicle by `dt` under constant control `u` using the default
/// forward-Euler discretization.
pub fn integrate_step(state: &VehicleState, u: f64, dt: f64) -> Integrated {
    integrate_step_with(Discretization::ForwardEuler, state, u, dt)
}

pub fn integrate_step_with(
    disc: Discretization,
    state: &VehicleState,
    u: f64,
    dt: f64,
) -> Integrated {
    debug_assert!(dt > 0.0);
    let v_next = state.v + u * dt;
    let clamped = v_next < 0.0;
    let x_next = match disc {
        Discretization::ForwardEuler => state.x + state.v * dt,
        Discretization::ZeroOrderHold if clamped => {
            // stops inside the step after v / |u| seconds
            state.x + 0.5 * state.v * state.v / -u
        }
        Discretization::ZeroOrderHold => state.x + state.v * dt + 0.5 * u * dt * dt,
    };
    Integrated {
        state: VehicleState {
            x: x_next,
            v: v_next.max(0.0),
            u,
            ..state.clone()
        },
        clamped,
    }
}

/// Bumper-independent gap `x_pred - x_ego` in lane-origin coordinates.
/// Negative values mean overlap.
pub fn gap(pred: &VehicleState, ego: &VehicleState) -> f64 {
    pred.x - ego.x
}
