//! Scenario files, traces, summaries and the two-mode comparison.

mod compare;
mod config;
mod plot;
mod trace;

pub use compare::{compare_traces, run_compare, write_report, Comparison, ComparisonReport, ModeRun, VehicleComparison};
pub use config::{
    config_to_toml, parse_config, parse_config_str, resolve_config, CONFIG_KEYS,
};
pub use plot::{emit_plot_data, write_plot_data, PlotRow, PLOT_COLUMNS};
pub use trace::{
    quantize, read_summary, read_trace, write_summary, write_trace, TraceFile, TraceHeader,
    TRACE_COLUMNS, TRACE_FORMAT,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "OCBF_OUT_DIR";

/// Output directory used when neither a flag nor [`OUT_DIR_ENV`] is given.
pub const DEFAULT_OUT_DIR: &str = "ocbf-out";
