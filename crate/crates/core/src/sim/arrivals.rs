//! Seeded arrival streams and entry-state adjustment before the control zone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::ScenarioConfig;
use crate::constraints::snapshot_barriers;
use crate::vehicle::{Lane, NeighborView, SimParams, VehicleId, VehicleState};

/// Entry speeds are never lowered below this (or `v_min` if larger); a vehicle
/// that would need to is held back instead.
pub const MIN_ENTRY_SPEED: f64 = 1.0;

/// One sampled arrival at a road origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub id: VehicleId,
    pub lane: Lane,
    pub time: f64,
    /// Sampled entry speed, before adjustment.
    pub v0: f64,
}

/// All arrivals before the horizon, ordered by time, with ids in that order.
///
/// Depends only on the seed, rates, entry-speed range and horizon, so both
/// controller modes see the same stream.
pub fn generate_arrivals(config: &ScenarioConfig) -> Vec<Arrival> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::new();
    for (lane, rate) in [
        (Lane::Main, config.arrival_rate_main),
        (Lane::Merging, config.arrival_rate_merge),
    ] {
        if rate <= 0.0 {
            continue;
        }
        let Ok(gaps) = Exp::new(rate) else { continue };
        let mut t = 0.0;
        loop {
            t += gaps.sample(&mut rng);
            if t >= config.horizon {
                break;
            }
            let v0 = rng.random_range(config.v0_min..=config.v0_max);
            out.push(Arrival {
                id: VehicleId(0),
                lane,
                time: t,
                v0,
            });
        }
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    for (k, a) in out.iter_mut().enumerate() {
        a.id = VehicleId(k as u64);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntryDecision {
    Admit { v0: f64 },
    Defer,
}

/// Largest entry speed, at most `v_sampled`, for which every barrier that
/// applies at `x = 0` is non-negative.
pub fn sanitize_entry(
    lane: Lane,
    v_sampled: f64,
    neighbors: &NeighborView,
    params: &SimParams,
) -> EntryDecision {
    let floor = MIN_ENTRY_SPEED.max(params.v_min);
    let mut cap = v_sampled.min(params.v_max);
    let phi = params.reaction_time;
    let delta = params.standstill_gap;

    if let Some(p) = &neighbors.pred_physical {
        cap = cap.min((p.x - delta) / phi);
        cap = cap.min(p.v - phi * params.u_min);
    }
    if let Some(f) = neighbors.merge_pred() {
        if f.x < delta {
            return EntryDecision::Defer;
        }
        // b_eta2 at x = 0: v_f - v - phi2 v^2 >= 0
        let phi2 = params.merge_slope();
        let root = (-1.0 + (1.0 + 4.0 * phi2 * f.v).sqrt()) / (2.0 * phi2);
        cap = cap.min(root);
    }

    let mut v = cap;
    if v < v_sampled {
        v -= 1e-9 * (1.0 + v);
    }
    let mut shrink = 1e-9;
    for _ in 0..8 {
        if v < floor {
            return EntryDecision::Defer;
        }
        let ego = VehicleState::new(VehicleId(u64::MAX), lane, 0.0, v);
        let s = snapshot_barriers(&ego, neighbors, params);
        let ok = [s.b1, s.b_eta1, s.bf_rear, s.b2, s.b_eta2, s.bf_merge]
            .into_iter()
            .flatten()
            .all(|b| b >= 0.0);
        if ok {
            return EntryDecision::Admit { v0: v };
        }
        shrink *= 10.0;
        v -= shrink * (1.0 + v);
    }
    EntryDecision::Defer
}
