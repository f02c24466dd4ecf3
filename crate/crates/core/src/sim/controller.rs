use super::record::StepRecord;
use super::Mode;
use crate::constraints::{
    clf_row, control_bound_rows, feasibility_row_merge, feasibility_row_rear, merge_cbf_row_sampled,
    rear_end_cbf_row, snapshot_barriers, speed_limit_rows, LinearRow,
};
use crate::error::QpError;
use crate::qp::{feasible_interval_u, solve_qp, QpProblem, QpStatus};
use crate::reference::{reference_control_step, ReferenceTrajectory};
use crate::vehicle::{NeighborView, SimParams, VehicleState};

/// Decision of one vehicle for one step, with the rows it was taken under.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerOutput {
    pub u: f64,
    pub e: Option<f64>,
    pub rows: Vec<LinearRow>,
    pub record: StepRecord,
}

/// Assembles this step's QP for `vehicle` and solves it. An infeasible QP
/// falls back to full braking and is flagged in the record.
pub fn controller_step(
    vehicle: &VehicleState,
    neighbors: &NeighborView,
    traj: &ReferenceTrajectory,
    params: &SimParams,
    mode: Mode,
    t: f64,
) -> Result<ControllerOutput, QpError> {
    let (u_ref, v_ref) = reference_control_step(traj, vehicle.x, t, params.dt);

    let mut rows = vec![clf_row(vehicle, v_ref, params)];
    rows.extend(control_bound_rows(params, vehicle));
    if params.speed_limit_rows {
        rows.extend(speed_limit_rows(vehicle, params));
    }
    if let Some(p) = &neighbors.pred_physical {
        rows.push(rear_end_cbf_row(vehicle, p, params));
        if mode == Mode::FgOcbf {
            rows.push(feasibility_row_rear(vehicle, p, params));
        }
    }
    if let Some(f) = neighbors.merge_pred() {
        rows.push(merge_cbf_row_sampled(vehicle, f, params));
        if mode == Mode::FgOcbf {
            rows.push(feasibility_row_merge(vehicle, f, params));
        }
    }

    let sol = solve_qp(&QpProblem {
        u_ref,
        lambda_e: params.clf_weight,
        rows: rows.clone(),
    })?;
    let interval = feasible_interval_u(&rows);
    let (u, e) = match sol.status {
        QpStatus::Optimal => (sol.u, Some(sol.e)),
        QpStatus::Infeasible => (params.u_min, None),
    };

    let record = StepRecord {
        t,
        id: vehicle.id,
        lane: vehicle.lane,
        fifo_index: vehicle.fifo_index,
        x: vehicle.x,
        v: vehicle.v,
        u_applied: u,
        u_ref,
        v_ref,
        status: sol.status,
        feasible_lo: interval.map(|i| i.lo),
        feasible_hi: interval.map(|i| i.hi),
        e,
        barriers: snapshot_barriers(vehicle, neighbors, params),
        clamped: vehicle.v + u * params.dt < 0.0,
    };
    Ok(ControllerOutput { u, e, rows, record })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::RowTag;
    use crate::reference::solve_reference;
    use crate::vehicle::{Lane, VehicleId};

    fn car(id: u64, lane: Lane, x: f64, v: f64) -> VehicleState {
        VehicleState::new(VehicleId(id), lane, x, v)
    }

    fn tags(out: &ControllerOutput) -> Vec<RowTag> {
        out.rows.iter().map(|r| r.tag).collect()
    }

    #[test]
    fn lone_vehicle_tracks_reference() {
        let p = SimParams::default();
        let traj = solve_reference(20.0, 0.0, p.zone_length, p.beta).unwrap();
        let on_ref = traj.eval(3.0);
        let ego = car(0, Lane::Main, on_ref.x, on_ref.v);
        let out = controller_step(&ego, &NeighborView::alone(), &traj, &p, Mode::FgOcbf, 3.0).unwrap();
        let (u_ref, _) = reference_control_step(&traj, ego.x, 3.0, p.dt);
        assert!((out.u - u_ref).abs() < 1e-6);
        assert_eq!(out.record.barriers, Default::default());
        assert!(!tags(&out).iter().any(|t| t.is_safety_side()));
    }

    #[test]
    fn same_lane_fifo_predecessor_gives_only_rear_rows() {
        let p = SimParams::default();
        let traj = solve_reference(20.0, 0.0, p.zone_length, p.beta).unwrap();
        let ego = car(1, Lane::Main, 50.0, 20.0);
        let pred = car(0, Lane::Main, 120.0, 20.0);
        let view = NeighborView::new(Some(pred.clone()), Some(pred));
        let ocbf = controller_step(&ego, &view, &traj, &p, Mode::Ocbf, 2.5).unwrap();
        let safety: Vec<_> = tags(&ocbf).into_iter().filter(|t| t.is_safety_side()).collect();
        assert_eq!(safety, vec![RowTag::RearEndCbf]);
        let fg = controller_step(&ego, &view, &traj, &p, Mode::FgOcbf, 2.5).unwrap();
        let safety: Vec<_> = tags(&fg).into_iter().filter(|t| t.is_safety_side()).collect();
        assert_eq!(safety, vec![RowTag::RearEndCbf, RowTag::FeasRear]);
    }

    #[test]
    fn both_predecessors_give_four_upper_bounding_rows() {
        let p = SimParams::default();
        let traj = solve_reference(18.0, 0.0, p.zone_length, p.beta).unwrap();
        let ego = car(2, Lane::Merging, 150.0, 18.0);
        let pred = car(1, Lane::Merging, 230.0, 18.5);
        let fifo = car(0, Lane::Main, 260.0, 19.0);
        let view = NeighborView::new(Some(pred), Some(fifo));
        let out = controller_step(&ego, &view, &traj, &p, Mode::FgOcbf, 8.0).unwrap();
        let safety: Vec<_> = out.rows.iter().filter(|r| r.tag.is_safety_side()).collect();
        assert_eq!(safety.len(), 4);
        assert!(safety.iter().all(|r| r.coef_u <= 0.0));
        assert_eq!(out.record.status, QpStatus::Optimal);
    }

    #[test]
    fn infeasible_qp_brakes_fully() {
        let p = SimParams::default();
        let traj = solve_reference(25.0, 0.0, p.zone_length, p.beta).unwrap();
        // far inside the safe distance and closing fast
        let ego = car(1, Lane::Main, 100.0, 25.0);
        let pred = car(0, Lane::Main, 115.0, 5.0);
        let view = NeighborView::new(Some(pred.clone()), Some(pred));
        let out = controller_step(&ego, &view, &traj, &p, Mode::Ocbf, 4.0).unwrap();
        assert_eq!(out.record.status, QpStatus::Infeasible);
        assert_eq!(out.u, p.u_min);
        assert_eq!(out.record.feasible_lo, None);
        assert_eq!(out.e, None);
    }
}
