//! Command-line front end: built-in scenarios, analysis commands, CSV, JSON
//! and SVG output.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gfm_core::model::ControllerKind;

pub mod commands;
pub mod output;
pub mod plot;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "gfm", version, about = "Grid-forming inverter simulation and small-signal analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run built-in scenarios or scenario files; several run concurrently.
    Simulate(SimulateArgs),
    /// Eigenvalue locus of the reduced model over one parameter.
    Eigsweep(EigsweepArgs),
    /// Gains from the ratings and band limits.
    Design(DesignArgs),
    /// Large-signal steady reactive and active power under a voltage change.
    Steady(SteadyArgs),
    /// Effective droop slopes against the voltage amplitude.
    Curve(CurveArgs),
}

fn parse_kind(s: &str) -> Result<ControllerKind, String> {
    s.parse().map_err(|e: gfm_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in scenario names or TOML files (`all` runs every built-in).
    #[arg(required = true)]
    pub scenarios: Vec<String>,
    /// Controller of a single-inverter scenario.
    #[arg(long, value_parser = parse_kind, conflicts_with = "pair")]
    pub controller: Option<ControllerKind>,
    /// Controllers of a two-inverter scenario, e.g. `aho+droop`.
    #[arg(long)]
    pub pair: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Log every n-th integration step (overrides the file).
    #[arg(long)]
    pub decimation: Option<usize>,
    /// Write SVG plots next to the CSV.
    #[arg(long)]
    pub plot: bool,
}

/// System parameters: the laboratory set unless a file is given.
#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// TOML file whose `[system]` table replaces the laboratory parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EigsweepArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long, value_parser = parse_kind, default_value = "eaho")]
    pub controller: ControllerKind,
    /// Gain or circuit parameter (`eta_e`, `mu_e`, `l_g`, `r_g`, ...).
    #[arg(long)]
    pub param: String,
    /// Start value; a trailing `x` scales the base value (`0.5x`).
    #[arg(long)]
    pub from: String,
    #[arg(long)]
    pub to: String,
    #[arg(long, default_value_t = 61)]
    pub points: usize,
    /// Active-power reference of the operating point (W).
    #[arg(long, default_value_t = 2000.0)]
    pub p_ref: f64,
    #[arg(long, default_value_t = 0.0)]
    pub q_ref: f64,
    /// RMS grid voltage of the operating point (V).
    #[arg(long, default_value_t = 220.0)]
    pub v_g: f64,
    /// Locus CSV path.
    #[arg(long, default_value = "out/locus.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long, value_parser = parse_kind, default_value = "eaho")]
    pub controller: ControllerKind,
    /// Use the laboratory ratings (the default when no file is given).
    #[arg(long, conflicts_with = "config")]
    pub table1: bool,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SteadyArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Grid voltage in per unit of nominal; repeat for several rows.
    #[arg(long = "sag", required = true, num_args = 1..)]
    pub levels: Vec<f64>,
    #[arg(long, value_parser = parse_kind, conflicts_with = "all_controllers")]
    pub controller: Option<ControllerKind>,
    #[arg(long)]
    pub all_controllers: bool,
    #[arg(long, default_value_t = 0.0)]
    pub p_ref: f64,
    #[arg(long, default_value_t = 0.0)]
    pub q_ref: f64,
    /// Also write the table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Amplitude range in per unit of v_p0.
    #[arg(long, default_value_t = gfm_core::tuning::CURVE_RANGE.0)]
    pub from: f64,
    #[arg(long, default_value_t = gfm_core::tuning::CURVE_RANGE.1)]
    pub to: f64,
    #[arg(long, default_value_t = gfm_core::tuning::CURVE_POINTS)]
    pub points: usize,
    /// CSV path; the table goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit status for an error: 2 for configuration problems, 3 for divergence.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<gfm_core::Error>()) {
        Some(gfm_core::Error::Config(_)) => EXIT_CONFIG,
        Some(gfm_core::Error::Divergence { .. }) => EXIT_DIVERGED,
        _ => 1,
    }
}

pub fn run(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Eigsweep(a) => commands::eigsweep(&a),
        Command::Design(a) => commands::design(&a),
        Command::Steady(a) => commands::steady(&a),
        Command::Curve(a) => commands::curve(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
