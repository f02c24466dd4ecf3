//! Per-step trace records and per-run metrics.

use serde::{Deserialize, Serialize};

use super::Mode;
use crate::constraints::BarrierSnapshot;
use crate::qp::QpStatus;
use crate::vehicle::{Lane, VehicleId};

/// A barrier below `-BARRIER_TOL` counts as a violation; anything above is
/// discretization slack.
pub const BARRIER_TOL: f64 = 1e-3;

/// One vehicle at the start of one control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub id: VehicleId,
    pub lane: Lane,
    pub fifo_index: usize,
    pub x: f64,
    pub v: f64,
    pub u_applied: f64,
    pub u_ref: f64,
    pub v_ref: f64,
    pub status: QpStatus,
    /// Admissible acceleration band of the hard rows; `None` when empty.
    pub feasible_lo: Option<f64>,
    pub feasible_hi: Option<f64>,
    /// CLF relaxation, `None` when the QP had no solution.
    pub e: Option<f64>,
    pub barriers: BarrierSnapshot,
    /// The commanded deceleration would have reversed the vehicle.
    pub clamped: bool,
}

/// Outcome for one vehicle over its stay in the control zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSummary {
    pub id: VehicleId,
    pub lane: Lane,
    pub arrival_time: f64,
    pub t0: f64,
    pub v0_sampled: f64,
    pub v0: f64,
    /// Merging-point crossing time, `None` if still inside at the horizon.
    pub tm: Option<f64>,
    pub travel_time: Option<f64>,
    /// `sum(u^2 / 2 * dt)` over recorded steps.
    pub energy: f64,
    pub steps: usize,
    pub infeasible_steps: usize,
    pub min_b1: Option<f64>,
    pub min_b2: Option<f64>,
    pub violated: bool,
    pub clamp_events: usize,
    pub out_of_order: bool,
}

impl VehicleSummary {
    pub fn finished(&self) -> bool {
        self.tm.is_some()
    }
}

/// Aggregates over [`VehicleSummary`] entries; means use finished vehicles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregates {
    pub vehicles_entered: usize,
    pub vehicles_finished: usize,
    pub vehicles_unfinished: usize,
    pub mean_travel_time: Option<f64>,
    pub mean_energy: Option<f64>,
    pub total_infeasible_steps: usize,
    pub min_b1: Option<f64>,
    pub min_b2: Option<f64>,
    pub violations: usize,
    pub out_of_order_crossings: usize,
    pub clamp_events: usize,
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl RunAggregates {
    pub fn from_vehicles(vehicles: &[VehicleSummary]) -> Self {
        let finished: Vec<_> = vehicles.iter().filter(|v| v.finished()).collect();
        let n = finished.len();
        let mean = |f: &dyn Fn(&VehicleSummary) -> f64| {
            (n > 0).then(|| finished.iter().map(|v| f(v)).sum::<f64>() / n as f64)
        };
        Self {
            vehicles_entered: vehicles.len(),
            vehicles_finished: n,
            vehicles_unfinished: vehicles.len() - n,
            mean_travel_time: mean(&|v| v.travel_time.unwrap_or(0.0)),
            mean_energy: mean(&|v| v.energy),
            total_infeasible_steps: vehicles.iter().map(|v| v.infeasible_steps).sum(),
            min_b1: vehicles.iter().fold(None, |m, v| min_opt(m, v.min_b1)),
            min_b2: vehicles.iter().fold(None, |m, v| min_opt(m, v.min_b2)),
            violations: vehicles.iter().filter(|v| v.violated).count(),
            out_of_order_crossings: vehicles.iter().filter(|v| v.out_of_order).count(),
            clamp_events: vehicles.iter().map(|v| v.clamp_events).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    /// Arrivals still held back at the horizon.
    pub arrivals_pending: usize,
    pub vehicles: Vec<VehicleSummary>,
    pub aggregates: RunAggregates,
}

/// Entry metadata the records alone do not carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct EntryInfo {
    pub id: VehicleId,
    pub lane: Lane,
    pub arrival_time: f64,
    pub t0: f64,
    pub v0_sampled: f64,
    pub v0: f64,
    pub tm: Option<f64>,
    pub out_of_order: bool,
}

/// Folds the trace into per-vehicle summaries, in entry order.
pub(crate) fn summarize_vehicles(
    entries: &[EntryInfo],
    records: &[StepRecord],
    dt: f64,
) -> Vec<VehicleSummary> {
    use std::collections::HashMap;
    let mut out: Vec<VehicleSummary> = entries
        .iter()
        .map(|e| VehicleSummary {
            id: e.id,
            lane: e.lane,
            arrival_time: e.arrival_time,
            t0: e.t0,
            v0_sampled: e.v0_sampled,
            v0: e.v0,
            tm: e.tm,
            travel_time: e.tm.map(|tm| tm - e.t0),
            energy: 0.0,
            steps: 0,
            infeasible_steps: 0,
            min_b1: None,
            min_b2: None,
            violated: false,
            clamp_events: 0,
            out_of_order: e.out_of_order,
        })
        .collect();
    let slot: HashMap<VehicleId, usize> = out.iter().enumerate().map(|(k, v)| (v.id, k)).collect();
    for r in records {
        let s = &mut out[slot[&r.id]];
        s.energy += 0.5 * r.u_applied * r.u_applied * dt;
        s.steps += 1;
        if r.status == QpStatus::Infeasible {
            s.infeasible_steps += 1;
        }
        s.min_b1 = min_opt(s.min_b1, r.barriers.b1);
        s.min_b2 = min_opt(s.min_b2, r.barriers.b2);
        if r.clamped {
            s.clamp_events += 1;
        }
    }
    for s in &mut out {
        s.violated = min_opt(s.min_b1, s.min_b2).is_some_and(|b| b < -BARRIER_TOL);
    }
    out
}
