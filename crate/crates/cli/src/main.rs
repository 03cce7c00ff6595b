//! `evnum`: static solves, parameter sweeps and day-long simulations of EV
//! charging congestion control on a radial feeder.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "evnum", version, about = "EV charging congestion control by network utility maximization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct Common {
    /// key=value run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory holding lines.csv, codes.csv, loads.csv and the shape files.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub lines: Option<PathBuf>,
    #[arg(long, global = true)]
    pub codes: Option<PathBuf>,
    #[arg(long, global = true)]
    pub loads: Option<PathBuf>,
    /// Directory the shape paths in the loads file are relative to.
    #[arg(long, global = true)]
    pub shapes_dir: Option<PathBuf>,
    /// dual, primal or centralized (solve only).
    #[arg(long, global = true)]
    pub algorithm: Option<String>,
    #[arg(long, global = true)]
    pub step_size: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the static single-phase instance once.
    Solve(SolveArgs),
    /// Sweep the step size, the number of chargers or the number of lines.
    Sweep(SweepArgs),
    /// Simulate one day under the dual and primal controllers.
    Dynamic(DynamicArgs),
    /// Validate the feeder files and summarize the topology.
    CheckFeeder(CheckArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Minute of the day whose base load sets the capacities.
    #[arg(long)]
    pub minute: Option<usize>,
    /// Keep every n-th iteration in trace.csv.
    #[arg(long)]
    pub trace_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// step-size, N or M.
    #[arg(long)]
    pub param: Option<String>,
    /// Comma-separated values.
    #[arg(long)]
    pub values: Option<String>,
    /// Per-instance dual step for size sweeps: lipschitz or linear.
    #[arg(long)]
    pub dual_bound: Option<String>,
    #[arg(long)]
    pub minute: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DynamicArgs {
    /// EV arrivals per minute.
    #[arg(long)]
    pub arrival_rate: Option<f64>,
    /// First minute of the arrival process.
    #[arg(long)]
    pub start_minute: Option<usize>,
    #[arg(long)]
    pub iterations_per_minute: Option<usize>,
    #[arg(long)]
    pub battery_kwh: Option<f64>,
    #[arg(long)]
    pub charger_kw: Option<f64>,
    #[arg(long)]
    pub dual_step_size: Option<f64>,
    #[arg(long)]
    pub primal_step_size: Option<f64>,
    /// Comma-separated line indices (source-to-leaf order) to trace.
    #[arg(long)]
    pub report_lines: Option<String>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub minute: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    match commands::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
