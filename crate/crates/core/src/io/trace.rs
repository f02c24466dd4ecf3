//! Trace files: one JSON header line, then CSV with one row per step record.
//!
//! | column | meaning |
//! |---|---|
//! | `t` | step start time, s |
//! | `id`, `lane`, `fifo_index` | vehicle identity, road, position in the crossing order |
//! | `x`, `v` | position from the road origin and speed at `t` |
//! | `u_applied`, `u_ref`, `v_ref` | applied control and the tracked reference |
//! | `status` | `optimal` or `infeasible` |
//! | `feasible_lo`, `feasible_hi` | admissible acceleration band, empty when infeasible |
//! | `e` | CLF relaxation, empty when infeasible |
//! | `b1`, `b2`, `b_eta1`, `b_eta2`, `bf_rear`, `bf_merge` | barrier values, empty when not applicable |
//! | `clamped` | `1` when the speed was held at zero |
//!
//! Reals are written with nine significant digits. [`TraceFile`] stores
//! values already rounded to that precision, so reading a written file gives
//! back an identical value.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{config_from_json, config_to_json};
use crate::constraints::BarrierSnapshot;
use crate::error::{Error, Result};
use crate::qp::QpStatus;
use crate::sim::{RunSummary, ScenarioConfig, StepRecord};
use crate::vehicle::{Lane, VehicleId};

pub const TRACE_FORMAT: &str = "ocbf-trace";

pub const TRACE_COLUMNS: [&str; 20] = [
    "t",
    "id",
    "lane",
    "fifo_index",
    "x",
    "v",
    "u_applied",
    "u_ref",
    "v_ref",
    "status",
    "feasible_lo",
    "feasible_hi",
    "e",
    "b1",
    "b2",
    "b_eta1",
    "b_eta2",
    "bf_rear",
    "bf_merge",
    "clamped",
];

/// Rounds to the nine significant digits used on disk.
pub fn quantize(x: f64) -> f64 {
    fmt_real(x).parse().expect("formatted real parses")
}

fn fmt_real(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub version: String,
    pub config: ScenarioConfig,
}

#[derive(Serialize, Deserialize)]
struct RawHeader {
    format: String,
    version: String,
    config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub rows: Vec<StepRecord>,
}

fn quantize_record(r: &StepRecord) -> StepRecord {
    let q = quantize;
    let qo = |x: Option<f64>| x.map(quantize);
    let b = &r.barriers;
    StepRecord {
        t: q(r.t),
        x: q(r.x),
        v: q(r.v),
        u_applied: q(r.u_applied),
        u_ref: q(r.u_ref),
        v_ref: q(r.v_ref),
        feasible_lo: qo(r.feasible_lo),
        feasible_hi: qo(r.feasible_hi),
        e: qo(r.e),
        barriers: BarrierSnapshot {
            b1: qo(b.b1),
            b2: qo(b.b2),
            b_eta1: qo(b.b_eta1),
            b_eta2: qo(b.b_eta2),
            bf_rear: qo(b.bf_rear),
            bf_merge: qo(b.bf_merge),
        },
        ..r.clone()
    }
}

impl TraceFile {
    /// Trace of a run, at file precision.
    pub fn new(config: &ScenarioConfig, records: &[StepRecord]) -> Self {
        Self {
            header: TraceHeader {
                version: env!("CARGO_PKG_VERSION").to_string(),
                config: config.clone(),
            },
            rows: records.iter().map(quantize_record).collect(),
        }
    }

    pub fn rows_for(&self, id: VehicleId) -> impl Iterator<Item = &StepRecord> {
        self.rows.iter().filter(move |r| r.id == id)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let header = RawHeader {
            format: TRACE_FORMAT.to_string(),
            version: self.header.version.clone(),
            config: config_to_json(&self.header.config),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_COLUMNS)?;
        for r in &self.rows {
            let b = &r.barriers;
            w.write_record([
                fmt_real(r.t),
                r.id.0.to_string(),
                r.lane.as_str().to_string(),
                r.fifo_index.to_string(),
                fmt_real(r.x),
                fmt_real(r.v),
                fmt_real(r.u_applied),
                fmt_real(r.u_ref),
                fmt_real(r.v_ref),
                r.status.as_str().to_string(),
                fmt_opt(r.feasible_lo),
                fmt_opt(r.feasible_hi),
                fmt_opt(r.e),
                fmt_opt(b.b1),
                fmt_opt(b.b2),
                fmt_opt(b.b_eta1),
                fmt_opt(b.b_eta2),
                fmt_opt(b.bf_rear),
                fmt_opt(b.bf_merge),
                u8::from(r.clamped).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut input = BufReader::new(input);
        let mut first = String::new();
        input.read_line(&mut first)?;
        let raw: RawHeader = serde_json::from_str(first.trim_end())?;
        if raw.format != TRACE_FORMAT {
            return Err(Error::Trace(format!("unexpected format `{}`", raw.format)));
        }
        let header = TraceHeader {
            version: raw.version,
            config: config_from_json(raw.config)?,
        };

        let mut reader = csv::Reader::from_reader(input);
        if reader.headers()?.iter().ne(TRACE_COLUMNS) {
            return Err(Error::Trace("column header does not match".into()));
        }
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            rows.push(parse_row(&rec).map_err(|e| Error::Trace(format!("row {}: {e}", line + 1)))?);
        }
        Ok(Self { header, rows })
    }
}

fn parse_row(rec: &csv::StringRecord) -> std::result::Result<StepRecord, String> {
    if rec.len() != TRACE_COLUMNS.len() {
        return Err(format!("expected {} fields, found {}", TRACE_COLUMNS.len(), rec.len()));
    }
    let real = |k: usize| -> std::result::Result<f64, String> {
        rec[k]
            .parse::<f64>()
            .map_err(|e| format!("{}: {e}", TRACE_COLUMNS[k]))
    };
    let opt = |k: usize| -> std::result::Result<Option<f64>, String> {
        if rec[k].is_empty() {
            Ok(None)
        } else {
            real(k).map(Some)
        }
    };
    let int = |k: usize| -> std::result::Result<u64, String> {
        rec[k]
            .parse::<u64>()
            .map_err(|e| format!("{}: {e}", TRACE_COLUMNS[k]))
    };
    Ok(StepRecord {
        t: real(0)?,
        id: VehicleId(int(1)?),
        lane: Lane::parse(&rec[2]).ok_or_else(|| format!("lane: `{}`", &rec[2]))?,
        fifo_index: int(3)? as usize,
        x: real(4)?,
        v: real(5)?,
        u_applied: real(6)?,
        u_ref: real(7)?,
        v_ref: real(8)?,
        status: QpStatus::parse(&rec[9]).ok_or_else(|| format!("status: `{}`", &rec[9]))?,
        feasible_lo: opt(10)?,
        feasible_hi: opt(11)?,
        e: opt(12)?,
        barriers: BarrierSnapshot {
            b1: opt(13)?,
            b2: opt(14)?,
            b_eta1: opt(15)?,
            b_eta2: opt(16)?,
            bf_rear: opt(17)?,
            bf_merge: opt(18)?,
        },
        clamped: match &rec[19] {
            "0" => false,
            "1" => true,
            other => return Err(format!("clamped: `{other}`")),
        },
    })
}

pub fn write_trace(path: &Path, trace: &TraceFile) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    trace.write_to(&mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<TraceFile> {
    TraceFile::read_from(File::open(path)?)
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, summary)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
