use std::path::Path;

use crate::error::{Error, Result};
use crate::io::trace::TraceFile;
use crate::vehicle::VehicleId;

pub const PLOT_COLUMNS: [&str; 8] = ["t", "u", "feasible_lo", "feasible_hi", "u_min", "u_max", "b1", "b2"];

/// One plotted step of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotRow {
    pub t: f64,
    pub u: f64,
    pub feasible_lo: Option<f64>,
    pub feasible_hi: Option<f64>,
    pub u_min: f64,
    pub u_max: f64,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
}

pub fn emit_plot_data(trace: &TraceFile, id: VehicleId) -> Result<Vec<PlotRow>> {
    let p = &trace.header.config.params;
    let rows: Vec<PlotRow> = trace
        .rows_for(id)
        .map(|r| PlotRow {
            t: r.t,
            u: r.u_applied,
            feasible_lo: r.feasible_lo,
            feasible_hi: r.feasible_hi,
            u_min: p.u_min,
            u_max: p.u_max,
            b1: r.barriers.b1,
            b2: r.barriers.b2,
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::UnknownVehicle(id.0));
    }
    Ok(rows)
}

/// Writes plot rows as CSV; missing values are left empty.
pub fn write_plot_data(path: &Path, rows: &[PlotRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PLOT_COLUMNS)?;
    let f = |x: f64| format!("{x:.8e}");
    let o = |x: Option<f64>| x.map(f).unwrap_or_default();
    for r in rows {
        w.write_record([
            f(r.t),
            f(r.u),
            o(r.feasible_lo),
            o(r.feasible_hi),
            f(r.u_min),
            f(r.u_max),
            o(r.b1),
            o(r.b2),
        ])?;
    }
    w.flush()?;
    Ok(())
}
