//! Finds seeds of a stress scenario on which the plain controller hits an
//! infeasible QP and later a negative barrier, while the feasibility-guaranteed
//! controller stays feasible and safe.
//!
//! ```text
//! cargo run --release -p ocbf-core --example seed_search -- <scenario.toml> <b1|b2> [count] [first_seed]
//! ```

use std::path::Path;

use ocbf_core::io::{parse_config, run_compare};
use ocbf_core::sim::BARRIER_TOL;
use ocbf_core::{QpStatus, StepRecord};

fn barrier(r: &StepRecord, which: &str) -> Option<f64> {
    match which {
        "b1" => r.barriers.b1,
        _ => r.barriers.b2,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let [_, path, which, rest @ ..] = args.as_slice() else {
        return Err("usage: seed_search <scenario.toml> <b1|b2> [count] [first_seed]".into());
    };
    let count: u64 = rest.first().map_or(Ok(1), |s| s.parse())?;
    let first: u64 = rest.get(1).map_or(Ok(0), |s| s.parse())?;
    let base = parse_config(Path::new(path), &[])?;

    let mut found = 0;
    for seed in first.. {
        let cfg = ocbf_core::ScenarioConfig { seed, ..base.clone() };
        let c = run_compare(&cfg)?;
        let fg_ok = c.fg.summary.aggregates.total_infeasible_steps == 0
            && c.fg.trace.rows.iter().all(|r| {
                r.barriers.b1.is_none_or(|b| b >= -BARRIER_TOL)
                    && r.barriers.b2.is_none_or(|b| b >= -BARRIER_TOL)
            });
        let hit = c.report.vehicles.iter().find_map(|v| {
            let t_inf = v.first_infeasible_ocbf?;
            c.ocbf
                .trace
                .rows_for(v.id)
                .find(|r| r.t >= t_inf && barrier(r, which).is_some_and(|b| b < -BARRIER_TOL))
                .map(|r| (v.id, t_inf, r.t, barrier(r, which).unwrap()))
        });
        let infeasible = c.ocbf.trace.rows.iter().filter(|r| r.status == QpStatus::Infeasible).count();
        if let (true, Some((id, t_inf, t_neg, b))) = (fg_ok, hit) {
            println!(
                "seed {seed}: vehicle {} infeasible at {t_inf:.2} s, {which} = {b:.3} at {t_neg:.2} s ({infeasible} infeasible steps)",
                id.0
            );
            found += 1;
            if found == count {
                break;
            }
        }
    }
    Ok(())
}
