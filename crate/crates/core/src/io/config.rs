//! Flat TOML scenario files.
//!
//! Every key is optional and documented in the README; anything else is
//! rejected. `--key=value` overrides are merged into the table before
//! validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::ConfigError;
use crate::sim::{Mode, ScenarioConfig};
use crate::vehicle::{Discretization, SimParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FlatConfig {
    zone_length: f64,
    reaction_time: f64,
    standstill_gap: f64,
    u_min: f64,
    u_max: f64,
    v_min: f64,
    v_max: f64,
    dt: f64,
    beta: f64,
    k_rear: f64,
    k_merge: f64,
    clf_rate: f64,
    clf_weight: f64,
    k_speed: f64,
    speed_limit_rows: bool,
    discretization: Discretization,
    arrival_rate_main: f64,
    arrival_rate_merge: f64,
    v0_min: f64,
    v0_max: f64,
    horizon: f64,
    seed: u64,
    mode: Mode,
}

/// Keys accepted in a scenario file, in file order.
pub const CONFIG_KEYS: [&str; 23] = [
    "zone_length",
    "reaction_time",
    "standstill_gap",
    "u_min",
    "u_max",
    "v_min",
    "v_max",
    "dt",
    "beta",
    "k_rear",
    "k_merge",
    "clf_rate",
    "clf_weight",
    "k_speed",
    "speed_limit_rows",
    "discretization",
    "arrival_rate_main",
    "arrival_rate_merge",
    "v0_min",
    "v0_max",
    "horizon",
    "seed",
    "mode",
];

impl Default for FlatConfig {
    fn default() -> Self {
        Self::from(&ScenarioConfig::default())
    }
}

impl From<&ScenarioConfig> for FlatConfig {
    fn from(c: &ScenarioConfig) -> Self {
        let p = &c.params;
        Self {
            zone_length: p.zone_length,
            reaction_time: p.reaction_time,
            standstill_gap: p.standstill_gap,
            u_min: p.u_min,
            u_max: p.u_max,
            v_min: p.v_min,
            v_max: p.v_max,
            dt: p.dt,
            beta: p.beta,
            k_rear: p.k_rear,
            k_merge: p.k_merge,
            clf_rate: p.clf_rate,
            clf_weight: p.clf_weight,
            k_speed: p.k_speed,
            speed_limit_rows: p.speed_limit_rows,
            discretization: p.discretization,
            arrival_rate_main: c.arrival_rate_main,
            arrival_rate_merge: c.arrival_rate_merge,
            v0_min: c.v0_min,
            v0_max: c.v0_max,
            horizon: c.horizon,
            seed: c.seed,
            mode: c.mode,
        }
    }
}

impl From<FlatConfig> for ScenarioConfig {
    fn from(f: FlatConfig) -> Self {
        Self {
            params: SimParams {
                zone_length: f.zone_length,
                reaction_time: f.reaction_time,
                standstill_gap: f.standstill_gap,
                u_min: f.u_min,
                u_max: f.u_max,
                v_min: f.v_min,
                v_max: f.v_max,
                dt: f.dt,
                beta: f.beta,
                k_rear: f.k_rear,
                k_merge: f.k_merge,
                clf_rate: f.clf_rate,
                clf_weight: f.clf_weight,
                k_speed: f.k_speed,
                speed_limit_rows: f.speed_limit_rows,
                discretization: f.discretization,
            },
            arrival_rate_main: f.arrival_rate_main,
            arrival_rate_merge: f.arrival_rate_merge,
            v0_min: f.v0_min,
            v0_max: f.v0_max,
            horizon: f.horizon,
            seed: f.seed,
            mode: f.mode,
        }
    }
}

/// Interprets an override value as a TOML value, falling back to a bare string.
fn override_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn first_line(e: &impl std::fmt::Display) -> String {
    e.to_string().lines().next().unwrap_or_default().trim().to_string()
}

/// Builds a validated config from a parsed table plus `(key, value)` overrides.
pub fn resolve_config(mut table: Table, overrides: &[(String, String)]) -> Result<ScenarioConfig, ConfigError> {
    for (k, v) in overrides {
        let value = match table.get(k) {
            // keep strings as strings even when they look like numbers
            Some(Value::String(_)) => Value::String(v.clone()),
            _ => override_value(v),
        };
        table.insert(k.clone(), value);
    }
    for key in table.keys() {
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::new(key, "unknown key"));
        }
    }
    // integer literals are accepted where a float is expected
    for (key, value) in table.iter_mut() {
        let float_key = !matches!(key.as_str(), "seed" | "mode" | "discretization" | "speed_limit_rows");
        if let (true, Value::Integer(i)) = (float_key, &*value) {
            *value = Value::Float(*i as f64);
        }
    }
    for (key, value) in &table {
        let mut single = Table::new();
        single.insert(key.clone(), value.clone());
        if let Err(e) = single.try_into::<FlatConfig>() {
            return Err(ConfigError::new(key, first_line(&e)));
        }
    }
    let flat: FlatConfig = table
        .try_into()
        .map_err(|e| ConfigError::new("<file>", first_line(&e)))?;
    let config = ScenarioConfig::from(flat);
    config.validate()?;
    Ok(config)
}

pub fn parse_config_str(text: &str, overrides: &[(String, String)]) -> Result<ScenarioConfig, ConfigError> {
    let table: Table = text
        .parse()
        .map_err(|e| ConfigError::new("<file>", first_line(&e)))?;
    resolve_config(table, overrides)
}

/// Reads, merges overrides into, and validates a scenario file.
pub fn parse_config(path: &Path, overrides: &[(String, String)]) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("<file>", format!("{}: {e}", path.display())))?;
    parse_config_str(&text, overrides)
}

/// Fully resolved config as a scenario file.
pub fn config_to_toml(config: &ScenarioConfig) -> String {
    toml::to_string(&FlatConfig::from(config)).expect("flat config always serializes")
}

pub(crate) fn config_to_json(config: &ScenarioConfig) -> serde_json::Value {
    serde_json::to_value(FlatConfig::from(config)).expect("flat config always serializes")
}

pub(crate) fn config_from_json(value: serde_json::Value) -> Result<ScenarioConfig, ConfigError> {
    let flat: FlatConfig =
        serde_json::from_value(value).map_err(|e| ConfigError::new("<header>", e.to_string()))?;
    let config = ScenarioConfig::from(flat);
    config.validate()?;
    Ok(config)
}
