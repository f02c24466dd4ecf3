//! Closed-loop merging simulation: arrivals, the FIFO coordinator, the
//! per-vehicle controller and run metrics.

mod arrivals;
mod controller;
mod engine;
mod record;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::vehicle::SimParams;

pub use arrivals::{generate_arrivals, sanitize_entry, Arrival, EntryDecision, MIN_ENTRY_SPEED};
pub use controller::{controller_step, ControllerOutput};
pub use engine::{run, CoordinatorState, Simulation, StepOutcome};
pub use record::{RunAggregates, RunSummary, StepRecord, VehicleSummary, BARRIER_TOL};

/// Which rows each per-step QP carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Tracking, bounds and safety CBF rows only.
    Ocbf,
    /// Additionally the feasibility row of every safety CBF row present.
    FgOcbf,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ocbf => "ocbf",
            Mode::FgOcbf => "fg-ocbf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ocbf" => Some(Mode::Ocbf),
            "fg-ocbf" | "fgocbf" => Some(Mode::FgOcbf),
            _ => None,
        }
    }
}

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: SimParams,
    /// Poisson arrival rates, vehicles/s.
    pub arrival_rate_main: f64,
    pub arrival_rate_merge: f64,
    /// Entry speeds are drawn uniformly from `[v0_min, v0_max]`.
    pub v0_min: f64,
    pub v0_max: f64,
    /// Simulated time, s.
    pub horizon: f64,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            params: SimParams::default(),
            arrival_rate_main: 0.25,
            arrival_rate_merge: 0.25,
            v0_min: 15.0,
            v0_max: 25.0,
            horizon: 120.0,
            seed: 0,
            mode: Mode::FgOcbf,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        for (key, rate) in [
            ("arrival_rate_main", self.arrival_rate_main),
            ("arrival_rate_merge", self.arrival_rate_merge),
        ] {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(ConfigError::new(key, "must be finite and >= 0"));
            }
        }
        let p = &self.params;
        if !(self.v0_min.is_finite() && self.v0_min >= p.v_min && self.v0_min > 0.0) {
            return Err(ConfigError::new("v0_min", "must be > 0 and >= v_min"));
        }
        if !(self.v0_max.is_finite() && self.v0_max <= p.v_max) {
            return Err(ConfigError::new("v0_max", "must be <= v_max"));
        }
        if self.v0_max < self.v0_min {
            return Err(ConfigError::new("v0_max", "must be >= v0_min"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ConfigError::new("horizon", "must be finite and > 0"));
        }
        Ok(())
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self {
            mode,
            ..self.clone()
        }
    }
}
