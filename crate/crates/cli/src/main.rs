//! Operator-facing command line for the simulation, logging, splitting,
//! checking, and calibration pipeline.
//!
//! Exit codes of `check`: 0 when no deviations were found, 1 when at least
//! one alert was raised, 2 on input errors. Other commands use 0/2.
//! Environment variables are not consulted; every run is a pure function of
//! its flags, input files, and seed.

mod cmd;
mod load;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "flowmon",
    version,
    about = "Process simulation, event logging, and online conformance checking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate process instances: writes the notification stream, the
    /// persisted log (plus index sidecar), and an XES export.
    Simulate(SimulateArgs),
    /// Check an event source for deviations; alerts stream as JSON lines.
    Check(CheckArgs),
    /// Derive DTW thresholds and warm statistics from conforming logs.
    Calibrate(CalibrateArgs),
    /// Export a persisted log as XES XML.
    ExportXes(ExportArgs),
    /// Print per-task duration/gap statistics of a log.
    Stats(StatsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Model document file(s); the first model of the first file is the
    /// default entry point.
    #[arg(long = "models", required = true, num_args = 1..)]
    models: Vec<PathBuf>,
    /// Model id to instantiate (defaults to the first model).
    #[arg(long)]
    model_id: Option<String>,
    /// Number of instances to run back to back.
    #[arg(long, default_value_t = 1)]
    instances: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fault plan JSON file.
    #[arg(long)]
    faults: Option<PathBuf>,
    /// Clock configuration JSON file.
    #[arg(long)]
    clock: Option<PathBuf>,
    /// Directory of golden reference series (<series_id>.json).
    #[arg(long)]
    references: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also stream notifications to stdout (pipe into `check --notifications -`).
    #[arg(long)]
    stream: bool,
}

#[derive(Args)]
struct CheckArgs {
    /// Live notification stream (JSON lines; `-` for stdin).
    #[arg(long, conflicts_with_all = ["events", "log"])]
    notifications: Option<PathBuf>,
    /// Event-stream items (logger output; `-` for stdin).
    #[arg(long, conflicts_with = "log")]
    events: Option<PathBuf>,
    /// Persisted log to replay.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Replay speed: `instant` or a multiplier like `10`.
    #[arg(long, default_value = "instant")]
    speed: String,
    /// Checker configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of golden reference series.
    #[arg(long)]
    references: Option<PathBuf>,
    /// Warm statistics snapshot from `calibrate`.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Alert output file (JSON lines; default stdout).
    #[arg(long)]
    alerts: Option<PathBuf>,
    /// Write the per-case/part cost summary as JSON.
    #[arg(long)]
    summary_out: Option<PathBuf>,
    /// Write the split event stream (part field assigned) as JSON lines.
    #[arg(long)]
    split_out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Conforming persisted logs (at least two).
    #[arg(long = "logs", required = true, num_args = 1..)]
    logs: Vec<PathBuf>,
    #[arg(long)]
    references: Option<PathBuf>,
    /// Base configuration the thresholds are merged into.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_config: PathBuf,
    #[arg(long)]
    out_stats: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    log: PathBuf,
    /// Output file (`-` for stdout).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    log: PathBuf,
}

/// Die quietly when a downstream pipe closes (`flowmon ... | head`), like
/// other line-oriented tools.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd::simulate::run(args).map(|()| ExitCode::SUCCESS),
        Command::Check(args) => cmd::check::run(args),
        Command::Calibrate(args) => cmd::calibrate::run(args).map(|()| ExitCode::SUCCESS),
        Command::ExportXes(args) => cmd::export_xes::run(args).map(|()| ExitCode::SUCCESS),
        Command::Stats(args) => cmd::stats::run(args).map(|()| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
