//! Affine constraint rows in the decision variables `(u, e)` and the barrier
//! functions they come from.
//!
//! Every safety barrier `b(x) >= 0` is turned into a row that is linear in the
//! acceleration by requiring `Lf b + Lg b * u + k * b >= 0`. For the two safety
//! barriers a second, control-dependent row is added whose satisfaction keeps
//! the safety row compatible with the braking limit at the next step:
//!
//! | barrier                                   | row (all of the form `coef_u * u >= rhs`) |
//! |-------------------------------------------|-------------------------------------------|
//! | `b1 = z - phi v - delta`                  | `v_p - v - phi u + k1 b1 >= 0`             |
//! | `b_eta1 = v_p - v - phi u_min`            | `u_p - u + k1 b_eta1 >= 0`                 |
//! | `b2 = z - phi2 x v - delta`               | `v_f - v - phi2 v^2 - phi2 x u + k2 b2 >= 0` |
//! | `b_eta2 = v_f - v - phi2 v^2 - phi2 x u_min` | `u_f - u - 2 phi2 v u - phi2 v u_min + k2 b_eta2 >= 0` |
//!
//! with `phi2 = phi / L`. The coefficient of `u` in all four rows is
//! non-positive whenever `v >= 0`, so they only ever bound `u` from above.

use serde::{Deserialize, Serialize};

use crate::vehicle::{gap, NeighborView, SimParams, VehicleState};

/// Inequality direction of a row `coef_u * u + coef_e * e (sense) rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Ge,
    Le,
}

/// Which constraint a row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowTag {
    RearEndCbf,
    MergeCbf,
    Clf,
    ControlLower,
    ControlUpper,
    SpeedMaxCbf,
    SpeedMinCbf,
    FeasRear,
    FeasMerge,
}

impl RowTag {
    /// Safety CBF and feasibility rows, the ones that must bound `u` from above.
    pub fn is_safety_side(self) -> bool {
        matches!(
            self,
            RowTag::RearEndCbf | RowTag::MergeCbf | RowTag::FeasRear | RowTag::FeasMerge
        )
    }
}

/// One affine inequality `coef_u * u + coef_e * e (sense) rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub coef_u: f64,
    pub coef_e: f64,
    pub rhs: f64,
    pub sense: Sense,
    pub tag: RowTag,
}

impl LinearRow {
    pub fn ge(tag: RowTag, coef_u: f64, rhs: f64) -> Self {
        Self {
            coef_u,
            coef_e: 0.0,
            rhs,
            sense: Sense::Ge,
            tag,
        }
    }

    pub fn le(tag: RowTag, coef_u: f64, rhs: f64) -> Self {
        Self {
            coef_u,
            coef_e: 0.0,
            rhs,
            sense: Sense::Le,
            tag,
        }
    }

    pub fn lhs(&self, u: f64, e: f64) -> f64 {
        self.coef_u * u + self.coef_e * e
    }

    /// Signed slack, non-negative iff the row holds.
    pub fn slack(&self, u: f64, e: f64) -> f64 {
        match self.sense {
            Sense::Ge => self.lhs(u, e) - self.rhs,
            Sense::Le => self.rhs - self.lhs(u, e),
        }
    }

    pub fn holds(&self, u: f64, e: f64) -> bool {
        self.slack(u, e) >= 0.0
    }

    /// The same row written as `coef_u * u + coef_e * e >= rhs`.
    pub fn as_ge(&self) -> (f64, f64, f64) {
        match self.sense {
            Sense::Ge => (self.coef_u, self.coef_e, self.rhs),
            Sense::Le => (-self.coef_u, -self.coef_e, -self.rhs),
        }
    }

    /// Upper bound this row places on `u`, if it is a pure upper bound.
    pub fn upper_bound(&self) -> Option<f64> {
        let (a, c, r) = self.as_ge();
        (c == 0.0 && a < 0.0).then(|| r / a)
    }
}

/// Rear-end barrier `b1 = z - phi v - delta` against the physical predecessor.
pub fn rear_end_barrier(ego: &VehicleState, pred: &VehicleState, params: &SimParams) -> f64 {
    gap(pred, ego) - params.reaction_time * ego.v - params.standstill_gap
}

/// `v_p - v - phi u + k1 b1 >= 0`.
pub fn rear_end_cbf_row(ego: &VehicleState, pred: &VehicleState, params: &SimParams) -> LinearRow {
    let b1 = rear_end_barrier(ego, pred, params);
    let drift = pred.v - ego.v + params.k_rear * b1;
    LinearRow::ge(RowTag::RearEndCbf, -params.reaction_time, -drift)
}

/// `b_eta1 = v_p - v - phi u_min`: the follower is not too much faster than
/// its predecessor to stop in time at full braking.
pub fn rear_feasibility_barrier(ego: &VehicleState, pred: &VehicleState, params: &SimParams) -> f64 {
    pred.v - ego.v - params.reaction_time * params.u_min
}

/// Rear-end feasibility barrier `b_F = v_p - v + k1 b1 - phi u_min`: the
/// rear-end CBF row admits `u = u_min` iff this is non-negative.
pub fn rear_cbf_slack_at_min(ego: &VehicleState, pred: &VehicleState, params: &SimParams) -> f64 {
    pred.v - ego.v + params.k_rear * rear_end_barrier(ego, pred, params)
        - params.reaction_time * params.u_min
}

/// `u_p - u + k1 b_eta1 >= 0`, with `u_p` the predecessor's control.
pub fn feasibility_row_rear(
    ego: &VehicleState,
    pred: &VehicleState,
    params: &SimParams,
) -> LinearRow {
    let b_eta = rear_feasibility_barrier(ego, pred, params);
    LinearRow::ge(RowTag::FeasRear, -1.0, -(pred.u + params.k_rear * b_eta))
}

/// Merging barrier `b2 = z - phi2 x v - delta` against the FIFO predecessor on
/// the other road. At `x = L` it is exactly the safe-merging condition.
pub fn merge_barrier(ego: &VehicleState, pred_fifo: &VehicleState, params: &SimParams) -> f64 {
    gap(pred_fifo, ego) - params.merge_slope() * ego.x * ego.v - params.standstill_gap
}

/// `v_f - v - phi2 v^2 - phi2 x u + k2 b2 >= 0`.
pub fn merge_cbf_row(
    ego: &VehicleState,
    pred_fifo: &VehicleState,
    params: &SimParams,
) -> LinearRow {
    let phi2 = params.merge_slope();
    let b2 = merge_barrier(ego, pred_fifo, params);
    let drift = pred_fifo.v - ego.v - phi2 * ego.v * ego.v + params.k_merge * b2;
    LinearRow::ge(RowTag::MergeCbf, -phi2 * ego.x, -drift)
}

/// [`merge_cbf_row`] with the position in the control coefficient advanced
/// to the end of the step, `x + v dt`. Under forward-Euler integration the
/// next position does not depend on `u`, so this row is exactly
/// `b2(t + dt) >= (1 - k2 dt) b2(t)` and the barrier stays non-negative
/// without the `phi2 v u dt^2` drift of the continuous row.
pub fn merge_cbf_row_sampled(
    ego: &VehicleState,
    pred_fifo: &VehicleState,
    params: &SimParams,
) -> LinearRow {
    let mut row = merge_cbf_row(ego, pred_fifo, params);
    row.coef_u = -params.merge_slope() * (ego.x + ego.v * params.dt);
    row
}

/// `b_eta2 = v_f - v - phi2 v^2 - phi2 x u_min`.
pub fn merge_feasibility_barrier(
    ego: &VehicleState,
    pred_fifo: &VehicleState,
    params: &SimParams,
) -> f64 {
    let phi2 = params.merge_slope();
    pred_fifo.v - ego.v - phi2 * ego.v * ego.v - phi2 * ego.x * params.u_min
}

/// Merging feasibility barrier
/// `b_F = v_f - v - phi2 v^2 + k2 b2 - phi2 x u_min`.
pub fn merge_cbf_slack_at_min(
    ego: &VehicleState,
    pred_fifo: &VehicleState,
    params: &SimParams,
) -> f64 {
    let phi2 = params.merge_slope();
    pred_fifo.v - ego.v - phi2 * ego.v * ego.v
        + params.k_merge * merge_barrier(ego, pred_fifo, params)
        - phi2 * ego.x * params.u_min
}

/// `u_f - u - 2 phi2 v u - phi2 v u_min + k2 b_eta2 >= 0`.
pub fn feasibility_row_merge(
    ego: &VehicleState,
    pred_fifo: &VehicleState,
    params: &SimParams,
) -> LinearRow {
    let phi2 = params.merge_slope();
    let b_eta = merge_feasibility_barrier(ego, pred_fifo, params);
    let coef = -(1.0 + 2.0 * phi2 * ego.v);
    let rhs = -(pred_fifo.u - phi2 * ego.v * params.u_min + params.k_merge * b_eta);
    LinearRow::ge(RowTag::FeasMerge, coef, rhs)
}

/// Relaxed CLF row for `V = (v - v_ref)^2`:
/// `2 (v - v_ref) u + eps (v - v_ref)^2 <= e`.
pub fn clf_row(ego: &VehicleState, v_ref: f64, params: &SimParams) -> LinearRow {
    let err = ego.v - v_ref;
    LinearRow {
        coef_u: 2.0 * err,
        coef_e: -1.0,
        rhs: -params.clf_rate * err * err,
        sense: Sense::Le,
        tag: RowTag::Clf,
    }
}

/// `u >= u_min` and `u <= u_max` of this vehicle.
pub fn control_bound_rows(params: &SimParams, vehicle: &VehicleState) -> [LinearRow; 2] {
    [
        LinearRow::ge(RowTag::ControlLower, 1.0, params.u_min),
        LinearRow::le(RowTag::ControlUpper, 1.0, vehicle.u_max),
    ]
}

/// Speed limits as first-order CBFs: `u <= k_v (v_max - v)`, `u >= -k_v (v - v_min)`.
pub fn speed_limit_rows(ego: &VehicleState, params: &SimParams) -> [LinearRow; 2] {
    [
        LinearRow::le(
            RowTag::SpeedMaxCbf,
            1.0,
            params.k_speed * (params.v_max - ego.v),
        ),
        LinearRow::ge(
            RowTag::SpeedMinCbf,
            1.0,
            -params.k_speed * (ego.v - params.v_min),
        ),
    ]
}

/// Barrier values at one instant; `None` where the constraint does not apply.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BarrierSnapshot {
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    pub b_eta1: Option<f64>,
    pub b_eta2: Option<f64>,
    pub bf_rear: Option<f64>,
    pub bf_merge: Option<f64>,
}

/// Evaluates every barrier that applies to `ego` given its predecessors.
pub fn snapshot_barriers(
    ego: &VehicleState,
    neighbors: &NeighborView,
    params: &SimParams,
) -> BarrierSnapshot {
    let mut s = BarrierSnapshot::default();
    if let Some(p) = &neighbors.pred_physical {
        s.b1 = Some(rear_end_barrier(ego, p, params));
        s.b_eta1 = Some(rear_feasibility_barrier(ego, p, params));
        s.bf_rear = Some(rear_cbf_slack_at_min(ego, p, params));
    }
    if let Some(f) = neighbors.merge_pred() {
        s.b2 = Some(merge_barrier(ego, f, params));
        s.b_eta2 = Some(merge_feasibility_barrier(ego, f, params));
        s.bf_merge = Some(merge_cbf_slack_at_min(ego, f, params));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::{Lane, VehicleId};

    fn params() -> SimParams {
        SimParams {
            zone_length: 400.0,
            reaction_time: 1.8,
            standstill_gap: 10.0,
            u_min: -2.0,
            u_max: 3.0,
            k_rear: 1.0,
            k_merge: 1.0,
            ..SimParams::default()
        }
    }

    fn car(id: u64, lane: Lane, x: f64, v: f64, u: f64) -> VehicleState {
        VehicleState {
            u,
            ..VehicleState::new(VehicleId(id), lane, x, v)
        }
    }

    /// Largest grid point in `[lo, hi]` (step 1e-4) satisfying the row.
    fn grid_sup(row: &LinearRow, lo: f64, hi: f64) -> Option<f64> {
        let n = ((hi - lo) / 1e-4).round() as i64;
        (0..=n)
            .rev()
            .map(|k| lo + k as f64 * 1e-4)
            .find(|&u| row.holds(u, 0.0))
    }

    #[test]
    fn rear_barrier_examples() {
        let p = params();
        let ego = car(1, Lane::Main, 0.0, 20.0, 0.0);
        assert!(rear_end_barrier(&ego, &car(0, Lane::Main, 46.0, 20.0, 0.0), &p).abs() < 1e-12);
        let b = rear_end_barrier(&ego, &car(0, Lane::Main, 50.0, 20.0, 0.0), &p);
        assert!((b - 4.0).abs() < 1e-12);
        // independent recomputation
        assert!((b - (50.0 - 1.8 * 20.0 - 10.0)).abs() < 1e-12);
        let stopped = car(1, Lane::Main, 0.0, 0.0, 0.0);
        assert_eq!(rear_end_barrier(&stopped, &car(0, Lane::Main, 10.0, 0.0, 0.0), &p), 0.0);
    }

    #[test]
    fn rear_cbf_row_examples() {
        let p = params();
        let ego = car(1, Lane::Main, 0.0, 20.0, 0.0);
        let row = rear_end_cbf_row(&ego, &car(0, Lane::Main, 46.0, 20.0, 0.0), &p);
        assert_eq!(row.sense, Sense::Ge);
        assert_eq!(row.coef_u, -1.8);
        assert!(row.upper_bound().unwrap().abs() < 1e-12);

        let row = rear_end_cbf_row(&ego, &car(0, Lane::Main, 50.0, 20.0, 0.0), &p);
        let ub = row.upper_bound().unwrap();
        assert!((ub - 4.0 / 1.8).abs() < 1e-12);
        let sup = grid_sup(&row, -2.0, 3.0).unwrap();
        assert!((sup - 2.2222).abs() < 1e-4 + 1e-12, "grid sup {sup}");

        // k1 = 0: the class-K term vanishes
        let p0 = SimParams { k_rear: 0.0, ..p };
        let ego = car(1, Lane::Main, 0.0, 20.0, 0.0);
        let row = rear_end_cbf_row(&ego, &car(0, Lane::Main, 80.0, 23.6, 0.0), &p0);
        assert!((row.upper_bound().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rear_feasibility_examples() {
        let p = params();
        let ego = car(1, Lane::Main, 0.0, 20.0, 0.0);
        let pred = car(0, Lane::Main, 60.0, 20.0, 0.0);
        let row = feasibility_row_rear(&ego, &pred, &p);
        assert_eq!(row.coef_u, -1.0);
        assert!((row.upper_bound().unwrap() - 3.6).abs() < 1e-12);

        // b_eta1 = 0 reduces to u <= u_p
        let pred = car(0, Lane::Main, 60.0, 16.4, 1.25);
        assert!(rear_feasibility_barrier(&ego, &pred, &p).abs() < 1e-12);
        let row = feasibility_row_rear(&ego, &pred, &p);
        assert!((row.upper_bound().unwrap() - 1.25).abs() < 1e-12);

        // predecessor braking at u_min with b_eta1 >= 0 still admits u_min
        let pred = car(0, Lane::Main, 60.0, 17.0, p.u_min);
        assert!(rear_feasibility_barrier(&ego, &pred, &p) >= 0.0);
        assert!(feasibility_row_rear(&ego, &pred, &p).holds(p.u_min, 0.0));
    }

    #[test]
    fn merge_barrier_examples() {
        let p = params();
        let pred = car(0, Lane::Main, 120.0, 20.0, 0.0);
        let ego = car(1, Lane::Merging, 0.0, 25.0, 0.0);
        assert_eq!(merge_barrier(&ego, &pred, &p), 120.0 - 10.0);

        let ego = car(1, Lane::Merging, 400.0, 20.0, 0.0);
        let pred = car(0, Lane::Main, 446.0, 20.0, 0.0);
        assert!(merge_barrier(&ego, &pred, &p).abs() < 1e-12);

        let ego = car(1, Lane::Merging, 200.0, 20.0, 0.0);
        let pred = car(0, Lane::Main, 300.0, 20.0, 0.0);
        let b2 = merge_barrier(&ego, &pred, &p);
        assert!((b2 - 72.0).abs() < 1e-12);
        assert!((b2 - (100.0 - 0.0045 * 200.0 * 20.0 - 10.0)).abs() < 1e-12);
    }

    #[test]
    fn merge_cbf_row_examples() {
        let p = params();
        let ego = car(1, Lane::Merging, 0.0, 20.0, 0.0);
        let pred = car(0, Lane::Main, 100.0, 20.0, 0.0);
        assert_eq!(merge_cbf_row(&ego, &pred, &p).coef_u, 0.0);

        let ego = car(1, Lane::Merging, 200.0, 20.0, 0.0);
        let pred = car(0, Lane::Main, 300.0, 20.0, 0.0);
        let row = merge_cbf_row(&ego, &pred, &p);
        assert!((row.coef_u + 0.9).abs() < 1e-12);
        assert!((row.upper_bound().unwrap() - 78.0).abs() < 1e-9);
        let sup = grid_sup(&row, 70.0, 80.0).unwrap();
        assert!((sup - 78.0).abs() <= 1e-4 + 1e-9);

        // equal speeds on the barrier boundary: u <= -v^2 / x
        let x = 150.0;
        let v = 18.0;
        let z = 0.0045 * x * v + 10.0;
        let ego = car(1, Lane::Merging, x, v, 0.0);
        let pred = car(0, Lane::Main, x + z, v, 0.0);
        let ub = merge_cbf_row(&ego, &pred, &p).upper_bound().unwrap();
        assert!((ub + v * v / x).abs() < 1e-9);
    }

    #[test]
    fn sampled_merge_row_is_exact_discrete_condition() {
        let p = params();
        let ego = car(1, Lane::Merging, 200.0, 20.0, 0.0);
        let pred = car(0, Lane::Main, 300.0, 21.0, 0.4);
        let row = merge_cbf_row_sampled(&ego, &pred, &p);
        assert!((row.coef_u + 0.0045 * (200.0 + 20.0 * 0.05)).abs() < 1e-12);
        assert_eq!(row.rhs, merge_cbf_row(&ego, &pred, &p).rhs);
        for u in [-2.0, -0.5, 0.0, 1.0, 3.0] {
            let ego_next = crate::vehicle::integrate_step(&ego, u, p.dt).state;
            let pred_next = crate::vehicle::integrate_step(&pred, pred.u, p.dt).state;
            let b = merge_barrier(&ego, &pred, &p);
            let b_next = merge_barrier(&ego_next, &pred_next, &p);
            let lhs = b_next - (1.0 - p.k_merge * p.dt) * b;
            assert!((lhs - p.dt * row.slack(u, 0.0)).abs() < 1e-9, "u = {u}");
        }
    }

    #[test]
    fn merge_feasibility_examples() {
        let p = params();
        // v = 0: u <= u_f + k2 (v_f - phi2 x u_min)
        let ego = car(1, Lane::Merging, 100.0, 0.0, 0.0);
        let pred = car(0, Lane::Main, 200.0, 12.0, 0.5);
        let ub = feasibility_row_merge(&ego, &pred, &p).upper_bound().unwrap();
        assert!((ub - (0.5 + (12.0 - 0.0045 * 100.0 * -2.0))).abs() < 1e-12);

        let ego = car(1, Lane::Merging, 200.0, 20.0, 0.0);
        let pred = car(0, Lane::Main, 300.0, 20.0, 0.0);
        assert!(merge_feasibility_barrier(&ego, &pred, &p).abs() < 1e-12);
        let row = feasibility_row_merge(&ego, &pred, &p);
        assert!((row.coef_u + 1.18).abs() < 1e-12);
        // grid oracle over [-2, 3]: feasible at u_min, infeasible at u_max
        let n = 50_000;
        let feasible: Vec<f64> = (0..=n)
            .map(|k| -2.0 + 5.0 * k as f64 / n as f64)
            .filter(|&u| row.holds(u, 0.0))
            .collect();
        assert_eq!(feasible.first().copied(), Some(-2.0));
        assert!(!row.holds(3.0, 0.0));
        let sup = *feasible.last().unwrap();
        assert!((sup - 0.18 / 1.18).abs() < 1e-4);
    }

    #[test]
    fn clf_row_examples() {
        let p = SimParams {
            clf_rate: 10.0,
            ..params()
        };
        let ego = car(0, Lane::Main, 0.0, 15.0, 0.0);
        let row = clf_row(&ego, 15.0, &p);
        assert_eq!((row.coef_u, row.rhs), (0.0, 0.0));
        assert!(row.holds(1.0, 0.0) && !row.holds(1.0, -1e-9));

        let row = clf_row(&ego, 14.0, &p);
        assert_eq!(row.coef_u, 2.0);
        assert_eq!(row.coef_e, -1.0);
        // 2u + 10 <= e
        assert!(row.holds(1.0, 12.0) && !row.holds(1.0, 11.99));

        let row = clf_row(&ego, 20.0, &p);
        assert!(row.coef_u < 0.0);
    }

    #[test]
    fn bound_and_speed_rows() {
        let p = params();
        let ego = car(0, Lane::Main, 0.0, 30.0, 0.0);
        let [lo, hi] = control_bound_rows(&p, &ego);
        assert!(lo.holds(-2.0, 0.0) && !lo.holds(-2.001, 0.0));
        assert!(hi.holds(3.0, 0.0) && !hi.holds(3.001, 0.0));

        let [vmax, vmin] = speed_limit_rows(&ego, &p);
        assert!(vmax.holds(0.0, 0.0) && !vmax.holds(1e-9, 0.0));
        assert!(vmin.holds(-30.0, 0.0));
        let slow = car(0, Lane::Main, 0.0, 0.0, 0.0);
        let [_, vmin] = speed_limit_rows(&slow, &p);
        assert!(vmin.holds(0.0, 0.0) && !vmin.holds(-1e-9, 0.0));

        let mid = car(0, Lane::Main, 0.0, 15.0, 0.0);
        let [vmax, vmin] = speed_limit_rows(&mid, &p);
        assert_eq!(vmax.rhs, 15.0);
        assert_eq!(vmin.rhs, -15.0);
    }

    #[test]
    fn snapshot_examples() {
        let p = params();
        let ego = car(2, Lane::Merging, 100.0, 18.0, 0.0);
        assert_eq!(
            snapshot_barriers(&ego, &NeighborView::alone(), &p),
            BarrierSnapshot::default()
        );

        let pred = car(1, Lane::Merging, 160.0, 19.0, 0.3);
        let same = NeighborView::new(Some(pred.clone()), Some(pred.clone()));
        let s = snapshot_barriers(&ego, &same, &p);
        assert!(s.b1.is_some() && s.b_eta1.is_some() && s.bf_rear.is_some());
        assert!(s.b2.is_none() && s.b_eta2.is_none() && s.bf_merge.is_none());

        let fifo = car(0, Lane::Main, 230.0, 21.0, -0.4);
        let both = NeighborView::new(Some(pred.clone()), Some(fifo.clone()));
        let s = snapshot_barriers(&ego, &both, &p);
        let phi2 = 1.8 / 400.0;
        let expect_b1 = (160.0 - 100.0) - 1.8 * 18.0 - 10.0;
        let expect_eta1 = 19.0 - 18.0 + 1.8 * 2.0;
        let expect_b2 = (230.0 - 100.0) - phi2 * 100.0 * 18.0 - 10.0;
        let expect_eta2 = 21.0 - 18.0 - phi2 * 18.0 * 18.0 + phi2 * 100.0 * 2.0;
        assert!((s.b1.unwrap() - expect_b1).abs() < 1e-12);
        assert!((s.b_eta1.unwrap() - expect_eta1).abs() < 1e-12);
        assert!((s.bf_rear.unwrap() - (expect_eta1 + expect_b1)).abs() < 1e-12);
        assert!((s.b2.unwrap() - expect_b2).abs() < 1e-12);
        assert!((s.b_eta2.unwrap() - expect_eta2).abs() < 1e-12);
        assert!((s.bf_merge.unwrap() - (expect_eta2 + expect_b2)).abs() < 1e-12);
    }

    use proptest::prelude::*;

    prop_compose! {
        fn state_pair()(
            x in 0.0f64..400.0, v in 0.0f64..35.0, u in -2.0f64..3.0,
            z in -20.0f64..200.0, vp in 0.0f64..35.0, up in -2.0f64..3.0,
        ) -> (VehicleState, VehicleState) {
            (car(1, Lane::Merging, x, v, u), car(0, Lane::Main, x + z, vp, up))
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn safety_rows_only_bound_from_above((ego, pred) in state_pair()) {
            let p = params();
            for row in [
                rear_end_cbf_row(&ego, &pred, &p),
                feasibility_row_rear(&ego, &pred, &p),
                merge_cbf_row(&ego, &pred, &p),
                feasibility_row_merge(&ego, &pred, &p),
            ] {
                prop_assert!(row.coef_u <= 0.0);
                prop_assert_eq!(row.coef_e, 0.0);
            }
        }

        /// With k_F = k1 the full feasibility-CBF row splits into the
        /// candidate row plus k1 times the rear-end CBF row.
        #[test]
        fn rear_eta_chain_identity((ego, pred) in state_pair(), u in -2.0f64..3.0, k1 in 0.1f64..3.0) {
            let p = SimParams { k_rear: k1, ..params() };
            let (phi, delta, umin) = (p.reaction_time, p.standstill_gap, p.u_min);
            let z = pred.x - ego.x;
            let full = pred.u - u + k1 * (pred.v - ego.v - phi * u) + k1 * (pred.v - ego.v)
                + k1 * k1 * (z - phi * ego.v - delta) - k1 * phi * umin;
            let eta = feasibility_row_rear(&ego, &pred, &p).slack(u, 0.0);
            let cbf = rear_end_cbf_row(&ego, &pred, &p).slack(u, 0.0);
            prop_assert!((eta + k1 * cbf - full).abs() <= 1e-12 * (1.0 + full.abs().max(z.abs())));
        }

        #[test]
        fn merge_eta_chain_identity((ego, pred) in state_pair(), u in -2.0f64..3.0, k2 in 0.1f64..3.0) {
            let p = SimParams { k_merge: k2, ..params() };
            let phi2 = p.merge_slope();
            let (delta, umin) = (p.standstill_gap, p.u_min);
            let (x, v, vf, uf) = (ego.x, ego.v, pred.v, pred.u);
            let b2 = (pred.x - x) - phi2 * x * v - delta;
            // transformed CBF of the merging feasibility barrier with k_F = k2,
            // grouped as candidate terms + k2 * (b_eta2) + k2 * (CBF row)
            let full = uf - u - 2.0 * phi2 * v * u - phi2 * v * umin
                + k2 * (vf - v - phi2 * v * v - phi2 * x * umin)
                + k2 * (vf - v - phi2 * v * v - phi2 * x * u + k2 * b2);
            // and the same quantity from its definition, d/dt b_F + k2 b_F
            let bf = vf - v - phi2 * v * v + k2 * b2 - phi2 * x * umin;
            let bf_dot = uf - u - 2.0 * phi2 * v * u
                + k2 * (vf - v - phi2 * v * v - phi2 * x * u)
                - phi2 * v * umin;
            prop_assert!((bf_dot + k2 * bf - full).abs() <= 1e-12 * (1.0 + full.abs().max(b2.abs())));
            let eta = feasibility_row_merge(&ego, &pred, &p).slack(u, 0.0);
            let cbf = merge_cbf_row(&ego, &pred, &p).slack(u, 0.0);
            prop_assert!((eta + k2 * cbf - full).abs() <= 1e-12 * (1.0 + full.abs().max(b2.abs())));
        }

        /// The feasibility barrier is exactly the CBF row's slack at u_min.
        #[test]
        fn bf_is_cbf_slack_at_u_min((ego, pred) in state_pair()) {
            let p = params();
            let r = rear_end_cbf_row(&ego, &pred, &p).slack(p.u_min, 0.0);
            prop_assert!((r - rear_cbf_slack_at_min(&ego, &pred, &p)).abs() < 1e-9);
            let m = merge_cbf_row(&ego, &pred, &p).slack(p.u_min, 0.0);
            prop_assert!((m - merge_cbf_slack_at_min(&ego, &pred, &p)).abs() < 1e-9);
        }
    }

    /// Braking at `u_min` always satisfies the control part of the merging
    /// candidate row when `v >= 0`, `u_min <= 0` and `u_f >= u_min`.
    #[test]
    fn u_min_always_satisfies_merge_feasibility_row() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1_000_000 {
            let v: f64 = rng.random_range(0.0..40.0);
            let u_min: f64 = rng.random_range(-5.0..=0.0);
            let u_f: f64 = rng.random_range(u_min..=5.0);
            let phi2: f64 = rng.random_range(0.0..0.05);
            let u = u_min;
            assert!(u_f - u - 2.0 * phi2 * v * u - phi2 * v * u_min >= 0.0);
        }
    }
}
