use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod plot;

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "qreflect", version, about = "Quantum reflection of matter-wave solitons")]
struct Cli {
    /// Log level filter (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print derived physical parameters.
    Params(ParamsArgs),
    /// Compute and export the initial ground state of a scenario.
    Groundstate(RunArgs),
    /// Run one scenario and measure its reflection probability.
    Simulate(RunArgs),
    /// Run a scenario over a list of incident speeds.
    Scan(RunArgs),
    /// Plane-wave reflection for a step or surface potential.
    Planewave(PlaneWaveArgs),
    /// Emit a gnuplot script for a scan dataset.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Species and trap preset (rb85-jila, na23-mit).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub atoms: Option<f64>,
    /// Critical atom number.
    #[arg(long)]
    pub n_c: Option<f64>,
    /// Radial trap frequency, rad/s.
    #[arg(long)]
    pub omega_r: Option<f64>,
    /// Axial to radial frequency ratio.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Print CSV instead of a table.
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario preset (fig2b, fig3, fig5-solitonA, fig5-solitonB, fig5-inset-na).
    #[arg(long)]
    pub preset: Option<String>,
    /// Family label within a multi-family preset, e.g. "sigma/xi=0".
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Incident speed, m/s.
    #[arg(long)]
    pub v: Option<f64>,
    /// Comma-separated incident speeds, m/s.
    #[arg(long, value_delimiter = ',')]
    pub velocities: Option<Vec<f64>>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dx_max: Option<f64>,
    #[arg(long)]
    pub kh: Option<f64>,
    #[arg(long)]
    pub n_r: Option<usize>,
    #[arg(long)]
    pub atoms: Option<f64>,
    /// Relax grid spacing, radial resolution and time step by this factor.
    #[arg(long)]
    pub coarse: Option<f64>,
    /// Write the final wavefunction (density CSV and binary snapshot).
    #[arg(long)]
    pub snapshot: bool,
}

#[derive(Debug, Args)]
pub struct PlaneWaveArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Species and trap preset (rb85-jila, na23-mit).
    #[arg(long)]
    pub preset: Option<String>,
    /// Tanh step height V0, J.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "surface")]
    pub step: Option<f64>,
    /// Step width, m.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Step width in units of the soliton width.
    #[arg(long, conflicts_with = "sigma")]
    pub sigma_xi: Option<f64>,
    /// Atom number used for the soliton width.
    #[arg(long)]
    pub atoms: Option<f64>,
    /// Casimir-Polder surface instead of a step.
    #[arg(long)]
    pub surface: bool,
    /// Incident speed, m/s.
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub v_min: Option<f64>,
    #[arg(long)]
    pub v_max: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Directory holding scan.csv.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Script path; defaults to plot.gp inside the dataset.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Params(a) => commands::params(&a),
        Command::Groundstate(a) => commands::groundstate(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Scan(a) => commands::scan(&a),
        Command::Planewave(a) => commands::planewave(&a),
        Command::Plot(a) => plot::plot(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
