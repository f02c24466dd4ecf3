//! The FIFO coordinator and the synchronous step loop.

use std::collections::{HashMap, VecDeque};

use super::arrivals::{generate_arrivals, sanitize_entry, Arrival, EntryDecision};
use super::controller::controller_step;
use super::record::{summarize_vehicles, EntryInfo, RunAggregates, RunSummary, StepRecord};
use super::ScenarioConfig;
use crate::constraints::LinearRow;
use crate::error::Result;
use crate::reference::{ReferenceProblem, ReferenceSolver, ReferenceTrajectory};
use crate::vehicle::{integrate_step_with, Lane, NeighborView, VehicleId, VehicleState};

/// The crossing order as seen by the coordinator.
///
/// `leader` is the most recent vehicle to pass the merging point (FIFO index
/// 0); it is kept so that the first vehicle in the zone still has a
/// predecessor, and dropped at the next crossing. `queue[k]` has index `k + 1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoordinatorState {
    pub clock: f64,
    pub leader: Option<VehicleState>,
    pub queue: Vec<VehicleState>,
}

impl CoordinatorState {
    /// Nearest vehicle ahead of queue slot `k` on `lane`, falling back to the
    /// leader. `ahead` supplies the states to use for slots before `k`.
    fn physical_pred<'a>(
        lane: Lane,
        ahead: &'a [VehicleState],
        leader: Option<&'a VehicleState>,
    ) -> Option<&'a VehicleState> {
        ahead
            .iter()
            .rev()
            .find(|s| s.lane == lane)
            .or(leader.filter(|l| l.lane == lane))
    }

    fn view_for(lane: Lane, ahead: &[VehicleState], leader: Option<&VehicleState>) -> NeighborView {
        let pred_physical = Self::physical_pred(lane, ahead, leader).cloned();
        let pred_fifo = ahead.last().or(leader).cloned();
        NeighborView::new(pred_physical, pred_fifo)
    }

    fn reindex(&mut self) {
        if let Some(l) = &mut self.leader {
            l.fifo_index = 0;
        }
        for (k, s) in self.queue.iter_mut().enumerate() {
            s.fifo_index = k + 1;
        }
    }
}

/// One in-zone vehicle's step: its trace record and the rows of its QP.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub record: StepRecord,
    pub rows: Vec<LinearRow>,
}

/// A scenario in progress.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    coord: CoordinatorState,
    trajectories: Vec<ReferenceTrajectory>,
    pending: [VecDeque<Arrival>; 2],
    entries: Vec<EntryInfo>,
    entry_slot: HashMap<VehicleId, usize>,
    steps_done: u64,
}

fn road(lane: Lane) -> usize {
    match lane {
        Lane::Main => 0,
        Lane::Merging => 1,
    }
}

impl Simulation {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let mut pending = [VecDeque::new(), VecDeque::new()];
        for a in generate_arrivals(config) {
            pending[road(a.lane)].push_back(a);
        }
        Ok(Self {
            config: config.clone(),
            coord: CoordinatorState::default(),
            trajectories: Vec::new(),
            pending,
            entries: Vec::new(),
            entry_slot: HashMap::new(),
            steps_done: 0,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn coordinator(&self) -> &CoordinatorState {
        &self.coord
    }

    pub fn clock(&self) -> f64 {
        self.coord.clock
    }

    /// Whether the next step would start at or after the horizon.
    pub fn finished(&self) -> bool {
        self.coord.clock >= self.config.horizon - 1e-9 * self.config.params.dt
    }

    /// One step: every in-zone vehicle decides in FIFO order against the
    /// states at the start of the step and the controls its predecessors have
    /// just chosen; then all move, crossings are processed and arrivals admitted.
    pub fn advance(&mut self) -> Result<Vec<StepOutcome>> {
        let params = &self.config.params;
        let t = self.coord.clock;

        let leader = self.coord.leader.clone().map(|mut l| {
            l.u = l.u.max(0.0);
            l
        });
        let mut decided: Vec<VehicleState> = Vec::with_capacity(self.coord.queue.len());
        let mut outcomes = Vec::with_capacity(self.coord.queue.len());
        for (k, ego) in self.coord.queue.iter().enumerate() {
            let view = CoordinatorState::view_for(ego.lane, &decided, leader.as_ref());
            let out = controller_step(ego, &view, &self.trajectories[k], params, self.config.mode, t)?;
            decided.push(VehicleState {
                u: out.u,
                ..ego.clone()
            });
            outcomes.push(StepOutcome {
                record: out.record,
                rows: out.rows,
            });
        }

        let disc = params.discretization;
        let dt = params.dt;
        self.coord.leader = leader.map(|l| integrate_step_with(disc, &l, l.u, dt).state);
        let moved: Vec<VehicleState> = decided
            .iter()
            .map(|s| integrate_step_with(disc, s, s.u, dt).state)
            .collect();

        let l = params.zone_length;
        for (before, after) in decided.iter().zip(&moved) {
            if before.x < l && after.x >= l {
                let tm = t + dt * (l - before.x) / (after.x - before.x);
                self.entries[self.entry_slot[&after.id]].tm = Some(tm);
            }
        }
        for k in 1..moved.len() {
            let here = self.entries[self.entry_slot[&moved[k].id]].tm;
            let ahead = self.entries[self.entry_slot[&moved[k - 1].id]].tm;
            if let Some(tm) = here {
                if ahead.is_none_or(|ta| ta > tm) {
                    self.entries[self.entry_slot[&moved[k].id]].out_of_order = true;
                }
            }
        }
        self.coord.queue = moved;
        while self.coord.queue.first().is_some_and(|s| s.x >= l) {
            self.coord.leader = Some(self.coord.queue.remove(0));
            self.trajectories.remove(0);
        }

        self.steps_done += 1;
        self.coord.clock = self.steps_done as f64 * dt;
        self.admit_arrivals()?;
        self.coord.reindex();
        Ok(outcomes)
    }

    fn admit_arrivals(&mut self) -> Result<()> {
        let t = self.coord.clock;
        let params = self.config.params.clone();
        let mut blocked = [false; 2];
        loop {
            let next = (0..2)
                .filter(|&r| !blocked[r])
                .filter_map(|r| self.pending[r].front().map(|a| (r, *a)))
                .filter(|(_, a)| a.time <= t + 1e-9)
                .min_by(|x, y| x.1.time.total_cmp(&y.1.time));
            let Some((r, arrival)) = next else {
                return Ok(());
            };
            let view = CoordinatorState::view_for(
                arrival.lane,
                &self.coord.queue,
                self.coord.leader.as_ref(),
            );
            match sanitize_entry(arrival.lane, arrival.v0, &view, &params) {
                EntryDecision::Defer => blocked[r] = true,
                EntryDecision::Admit { v0 } => {
                    self.pending[r].pop_front();
                    let solver = ReferenceSolver {
                        v_min: params.v_min,
                        v_max: params.v_max,
                        ..ReferenceSolver::default()
                    };
                    let traj = solver.solve(&ReferenceProblem {
                        v0,
                        t0: t,
                        zone_length: params.zone_length,
                        beta: params.beta,
                    })?;
                    let state = VehicleState {
                        u_max: params.u_max,
                        t0: t,
                        fifo_index: self.coord.queue.len() + 1,
                        ..VehicleState::new(arrival.id, arrival.lane, 0.0, v0)
                    };
                    self.coord.queue.push(state);
                    self.trajectories.push(traj);
                    self.entry_slot.insert(arrival.id, self.entries.len());
                    self.entries.push(EntryInfo {
                        id: arrival.id,
                        lane: arrival.lane,
                        arrival_time: arrival.time,
                        t0: t,
                        v0_sampled: arrival.v0,
                        v0,
                        tm: None,
                        out_of_order: false,
                    });
                }
            }
        }
    }

    /// Reference trajectory of an in-zone vehicle.
    pub fn trajectory(&self, id: VehicleId) -> Option<&ReferenceTrajectory> {
        let k = self.coord.queue.iter().position(|s| s.id == id)?;
        self.trajectories.get(k)
    }

    pub fn pending_arrivals(&self) -> usize {
        self.pending.iter().map(VecDeque::len).sum()
    }

    /// Summary of everything recorded so far.
    pub fn summary(&self, records: &[StepRecord]) -> RunSummary {
        let vehicles = summarize_vehicles(&self.entries, records, self.config.params.dt);
        let aggregates = RunAggregates::from_vehicles(&vehicles);
        RunSummary {
            mode: self.config.mode,
            seed: self.config.seed,
            arrivals_pending: self.pending_arrivals(),
            vehicles,
            aggregates,
        }
    }
}

/// Runs a scenario to its horizon.
pub fn run(config: &ScenarioConfig) -> Result<(Vec<StepRecord>, RunSummary)> {
    let mut sim = Simulation::new(config)?;
    let mut records = Vec::new();
    while !sim.finished() {
        records.extend(sim.advance()?.into_iter().map(|o| o.record));
    }
    let summary = sim.summary(&records);
    Ok((records, summary))
}
