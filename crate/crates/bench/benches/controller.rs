use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ocbf_core::constraints::{clf_row, control_bound_rows, feasibility_row_rear, rear_end_cbf_row};
use ocbf_core::sim::controller_step;
use ocbf_core::{
    run, solve_qp, solve_reference, Lane, Mode, NeighborView, QpProblem, ScenarioConfig, SimParams,
    VehicleId, VehicleState,
};

fn pair() -> (VehicleState, VehicleState) {
    (
        VehicleState::new(VehicleId(1), Lane::Main, 120.0, 22.0),
        VehicleState::new(VehicleId(0), Lane::Main, 180.0, 18.0),
    )
}

fn bench_qp(c: &mut Criterion) {
    let params = SimParams::default();
    let (ego, pred) = pair();
    let mut rows = vec![clf_row(&ego, 20.0, &params)];
    rows.extend(control_bound_rows(&params, &ego));
    rows.push(rear_end_cbf_row(&ego, &pred, &params));
    rows.push(feasibility_row_rear(&ego, &pred, &params));
    let problem = QpProblem {
        u_ref: 0.4,
        lambda_e: params.clf_weight,
        rows,
    };
    c.bench_function("solve_qp/rear_pair", |b| b.iter(|| solve_qp(black_box(&problem))));
}

fn bench_reference(c: &mut Criterion) {
    c.bench_function("solve_reference", |b| {
        b.iter(|| solve_reference(black_box(17.5), black_box(42.0), 400.0, black_box(1.0)))
    });
}

fn bench_controller(c: &mut Criterion) {
    let params = SimParams::default();
    let (ego, pred) = pair();
    let traj = solve_reference(20.0, 0.0, params.zone_length, params.beta).unwrap();
    let neighbors = NeighborView::new(Some(pred.clone()), Some(pred));
    c.bench_function("controller_step/fg", |b| {
        b.iter(|| controller_step(black_box(&ego), &neighbors, &traj, &params, Mode::FgOcbf, 6.0))
    });
}

fn bench_run(c: &mut Criterion) {
    let cfg = ScenarioConfig {
        horizon: 60.0,
        seed: 7,
        ..ScenarioConfig::default()
    };
    let mut group = c.benchmark_group("run");
    group.sample_size(10);
    group.bench_function("two_road_60s", |b| b.iter(|| run(black_box(&cfg)).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_qp, bench_reference, bench_controller, bench_run);
criterion_main!(benches);
