use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trace::TraceFile;
use crate::error::Result;
use crate::qp::QpStatus;
use crate::sim::{run, Mode, RunSummary, ScenarioConfig, StepRecord};
use crate::vehicle::{Lane, VehicleId};

#[derive(Debug, Clone, PartialEq)]
pub struct ModeRun {
    pub trace: TraceFile,
    pub summary: RunSummary,
}

/// Per-vehicle differences between the two modes on the same arrivals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleComparison {
    pub id: VehicleId,
    pub lane: Lane,
    pub first_infeasible_ocbf: Option<f64>,
    pub first_infeasible_fg: Option<f64>,
    pub min_b1_ocbf: Option<f64>,
    pub min_b1_fg: Option<f64>,
    pub min_b2_ocbf: Option<f64>,
    pub min_b2_fg: Option<f64>,
    /// First step time at which the feasible bands differ, or at which the
    /// vehicle is in the zone under one mode only.
    pub divergence_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub infeasible_steps_ocbf: usize,
    pub infeasible_steps_fg: usize,
    pub violations_ocbf: usize,
    pub violations_fg: usize,
    pub vehicles: Vec<VehicleComparison>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub ocbf: ModeRun,
    pub fg: ModeRun,
    pub report: ComparisonReport,
}

fn min_of(rows: &[&StepRecord], f: impl Fn(&StepRecord) -> Option<f64>) -> Option<f64> {
    rows.iter().filter_map(|r| f(r)).reduce(f64::min)
}

fn by_vehicle(trace: &TraceFile) -> BTreeMap<VehicleId, Vec<&StepRecord>> {
    let mut m: BTreeMap<VehicleId, Vec<&StepRecord>> = BTreeMap::new();
    for r in &trace.rows {
        m.entry(r.id).or_default().push(r);
    }
    m
}

fn divergence(a: &[&StepRecord], b: &[&StepRecord]) -> Option<f64> {
    let band = |rows: &[&StepRecord]| -> BTreeMap<u64, (Option<f64>, Option<f64>)> {
        rows.iter()
            .map(|r| (r.t.to_bits(), (r.feasible_lo, r.feasible_hi)))
            .collect()
    };
    let (ba, bb) = (band(a), band(b));
    let mut times: Vec<f64> = ba
        .keys()
        .chain(bb.keys())
        .map(|&k| f64::from_bits(k))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .find(|t| ba.get(&t.to_bits()) != bb.get(&t.to_bits()))
}

fn compare_vehicle(id: VehicleId, a: &[&StepRecord], b: &[&StepRecord]) -> VehicleComparison {
    let first_infeasible = |rows: &[&StepRecord]| {
        rows.iter()
            .find(|r| r.status == QpStatus::Infeasible)
            .map(|r| r.t)
    };
    VehicleComparison {
        id,
        lane: a.first().or(b.first()).map(|r| r.lane).unwrap_or(Lane::Main),
        first_infeasible_ocbf: first_infeasible(a),
        first_infeasible_fg: first_infeasible(b),
        min_b1_ocbf: min_of(a, |r| r.barriers.b1),
        min_b1_fg: min_of(b, |r| r.barriers.b1),
        min_b2_ocbf: min_of(a, |r| r.barriers.b2),
        min_b2_fg: min_of(b, |r| r.barriers.b2),
        divergence_time: divergence(a, b),
    }
}

/// Report over two traces of the same scenario, `ocbf` then `fg`.
pub fn compare_traces(ocbf: &TraceFile, fg: &TraceFile, seed: u64) -> ComparisonReport {
    let (ma, mb) = (by_vehicle(ocbf), by_vehicle(fg));
    let ids: BTreeSet<VehicleId> = ma.keys().chain(mb.keys()).copied().collect();
    let empty = Vec::new();
    let vehicles = ids
        .into_iter()
        .map(|id| compare_vehicle(id, ma.get(&id).unwrap_or(&empty), mb.get(&id).unwrap_or(&empty)))
        .collect();
    let infeasible = |t: &TraceFile| t.rows.iter().filter(|r| r.status == QpStatus::Infeasible).count();
    ComparisonReport {
        seed,
        infeasible_steps_ocbf: infeasible(ocbf),
        infeasible_steps_fg: infeasible(fg),
        violations_ocbf: 0,
        violations_fg: 0,
        vehicles,
    }
}

pub fn write_report(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Runs the scenario under both modes with the same seed and compares them.
pub fn run_compare(config: &ScenarioConfig) -> Result<Comparison> {
    let run_mode = |mode: Mode| -> Result<ModeRun> {
        let cfg = config.with_mode(mode);
        let (records, summary) = run(&cfg)?;
        Ok(ModeRun {
            trace: TraceFile::new(&cfg, &records),
            summary,
        })
    };
    let (ocbf, fg) = std::thread::scope(|s| {
        let h = s.spawn(|| run_mode(Mode::Ocbf));
        let fg = run_mode(Mode::FgOcbf);
        (h.join().expect("comparison worker panicked"), fg)
    });
    let (ocbf, fg) = (ocbf?, fg?);
    let mut report = compare_traces(&ocbf.trace, &fg.trace, config.seed);
    report.violations_ocbf = ocbf.summary.aggregates.violations;
    report.violations_fg = fg.summary.aggregates.violations;
    Ok(Comparison { ocbf, fg, report })
}
