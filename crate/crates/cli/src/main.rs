use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ocbf_core::io::{
    config_to_toml, emit_plot_data, parse_config, read_trace, run_compare, write_plot_data,
    write_report, write_summary, write_trace, TraceFile, CONFIG_KEYS, DEFAULT_OUT_DIR, OUT_DIR_ENV,
};
use ocbf_core::{run, Error, VehicleId};

/// Merging-control simulator for connected automated vehicles.
///
/// Any config key may be overridden on the command line as `--key=value`.
#[derive(Debug, Parser)]
#[command(name = "ocbf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its trace and summary.
    Run {
        config: PathBuf,
        /// Output directory [default: $OCBF_OUT_DIR or ./ocbf-out]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario under both controllers with the same arrivals.
    Compare {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract one vehicle's band and barrier series from a trace.
    PlotData {
        trace: PathBuf,
        #[arg(long)]
        vehicle: u64,
        /// Output file [default: <out dir>/plot_<vehicle>.csv]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file and print it with all defaults filled in.
    ValidateConfig { config: PathBuf },
}

/// Separates `--key=value` config overrides from the arguments clap parses.
fn split_overrides(args: impl IntoIterator<Item = OsString>) -> (Vec<OsString>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for arg in args {
        let parsed = arg
            .to_str()
            .and_then(|s| s.strip_prefix("--"))
            .and_then(|s| s.split_once('='))
            .filter(|(k, _)| CONFIG_KEYS.contains(k));
        match parsed {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => rest.push(arg),
        }
    }
    (rest, overrides)
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn execute(command: Command, overrides: &[(String, String)]) -> Result<(), Error> {
    match command {
        Command::Run { config, out } => {
            let cfg = parse_config(&config, overrides)?;
            let dir = out_dir(out);
            fs::create_dir_all(&dir)?;
            let (records, summary) = run(&cfg)?;
            write_trace(&dir.join("trace.csv"), &TraceFile::new(&cfg, &records))?;
            write_summary(&dir.join("summary.json"), &summary)?;
            let a = &summary.aggregates;
            println!(
                "{}: {} vehicles ({} finished), {} infeasible steps, min b1 {}, min b2 {} -> {}",
                cfg.mode.as_str(),
                a.vehicles_entered,
                a.vehicles_finished,
                a.total_infeasible_steps,
                fmt_opt(a.min_b1),
                fmt_opt(a.min_b2),
                dir.display()
            );
        }
        Command::Compare { config, out } => {
            let cfg = parse_config(&config, overrides)?;
            let dir = out_dir(out);
            fs::create_dir_all(&dir)?;
            let c = run_compare(&cfg)?;
            for run in [&c.ocbf, &c.fg] {
                let tag = run.trace.header.config.mode.as_str();
                write_trace(&dir.join(format!("trace_{tag}.csv")), &run.trace)?;
                write_summary(&dir.join(format!("summary_{tag}.json")), &run.summary)?;
            }
            write_report(&dir.join("report.json"), &c.report)?;
            println!(
                "ocbf: {} infeasible steps, {} violating vehicles; fg-ocbf: {} infeasible steps, {} violating vehicles -> {}",
                c.report.infeasible_steps_ocbf,
                c.report.violations_ocbf,
                c.report.infeasible_steps_fg,
                c.report.violations_fg,
                dir.display()
            );
        }
        Command::PlotData {
            trace,
            vehicle,
            out,
        } => {
            let t = read_trace(&trace)?;
            let rows = emit_plot_data(&t, VehicleId(vehicle))?;
            let path = match out {
                Some(p) => p,
                None => {
                    let dir = out_dir(None);
                    fs::create_dir_all(&dir)?;
                    dir.join(format!("plot_{vehicle}.csv"))
                }
            };
            write_plot_data(&path, &rows)?;
            println!("{} rows -> {}", rows.len(), path.display());
        }
        Command::ValidateConfig { config } => {
            let cfg = parse_config(&config, overrides)?;
            print!("{}", config_to_toml(&cfg));
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let (args, overrides) = split_overrides(std::env::args_os());
    let cli = Cli::parse_from(args);
    match execute(cli.command, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn overrides_are_split_from_flags() {
        let args = ["ocbf", "run", "c.toml", "--seed=4", "--out=d", "--mode=ocbf"]
            .map(OsString::from);
        let (rest, o) = split_overrides(args);
        assert_eq!(rest, ["ocbf", "run", "c.toml", "--out=d"].map(OsString::from));
        assert_eq!(
            o,
            vec![("seed".into(), "4".into()), ("mode".into(), "ocbf".into())]
        );
    }

    #[test]
    fn config_errors_exit_with_one() {
        let e = Error::Config(ocbf_core::ConfigError::new("u_min", "must be < 0"));
        assert_eq!(exit_code(&e), 1);
        assert_eq!(exit_code(&Error::UnknownVehicle(3)), 2);
    }

    #[test]
    fn default_out_dir() {
        assert_eq!(out_dir(Some(PathBuf::from("x"))), Path::new("x"));
    }
}
