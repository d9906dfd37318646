//! Command line front end for pulse design, propagation and robustness scans.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "qpulse", version, about = "Two-level pulse design and robustness toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Produce a control table and design report for a protocol.
    Design(DesignArgs),
    /// Propagate a control table and write the state trajectory.
    Simulate(SimulateArgs),
    /// Sweep one perturbation axis and record the infidelity curve.
    Scan(ScanArgs),
    /// Regenerate a reference dataset and verify it against frozen checks.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct DesignArgs {
    /// Protocol name: rio, tcap-sine, tcap-hg or flat-pi.
    #[arg(long)]
    protocol: Option<String>,
    /// Hyper-Gaussian order (rio, tcap-hg).
    #[arg(long = "n")]
    order: Option<u32>,
    /// Number of sine terms (tcap-sine).
    #[arg(long)]
    terms: Option<usize>,
    /// Time contraction factor (tcap protocols).
    #[arg(long = "a")]
    contraction: Option<f64>,
    /// Half width of the pulse window in base units (tcap protocols).
    #[arg(long = "tf")]
    t_f: Option<f64>,
    /// Base pulse area (tcap protocols).
    #[arg(long)]
    area: Option<f64>,
    /// Collocation points for the geodesic solve (rio).
    #[arg(long)]
    grid_points: Option<usize>,
    /// Number of rows in the emitted control table.
    #[arg(long)]
    samples: Option<usize>,
    /// Geodesic solver tolerance (rio).
    #[arg(long = "tol")]
    tolerance: Option<f64>,
    /// Output units for rio controls: omega0 or fig2.
    #[arg(long)]
    units: Option<String>,
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl DesignArgs {
    fn as_config(&self) -> RunConfig {
        RunConfig {
            protocol: self.protocol.clone(),
            order: self.order,
            terms: self.terms,
            contraction: self.contraction,
            t_f: self.t_f,
            area: self.area,
            grid_points: self.grid_points,
            samples: self.samples,
            tolerance: self.tolerance,
            units: self.units.clone(),
            ..RunConfig::default()
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Control table to propagate.
    #[arg(long)]
    controls: PathBuf,
    /// Relative amplitude error.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Static detuning offset.
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Transverse coupling strength.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl SimulateArgs {
    fn as_config(&self) -> RunConfig {
        RunConfig {
            alpha: self.alpha,
            delta: self.delta,
            beta: self.beta,
            ..RunConfig::default()
        }
    }
}

#[derive(Args)]
struct ScanArgs {
    /// Control table to scan.
    #[arg(long)]
    controls: PathBuf,
    /// Perturbation axis: alpha, delta or beta.
    #[arg(long)]
    axis: Option<String>,
    /// Lower end of the sweep.
    #[arg(long = "min", allow_negative_numbers = true)]
    range_min: Option<f64>,
    /// Upper end of the sweep.
    #[arg(long = "max", allow_negative_numbers = true)]
    range_max: Option<f64>,
    /// Number of sweep points.
    #[arg(long)]
    points: Option<usize>,
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl ScanArgs {
    fn as_config(&self) -> RunConfig {
        RunConfig {
            axis: self.axis.clone(),
            range_min: self.range_min,
            range_max: self.range_max,
            points: self.points,
            ..RunConfig::default()
        }
    }
}

#[derive(Args)]
struct ReproduceArgs {
    /// Dataset to regenerate: fig1, fig2, fig3, fig4 or fig5.
    figure: String,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn resolve(config: Option<&PathBuf>, flags: RunConfig) -> Result<RunConfig, CliError> {
    match config {
        Some(path) => Ok(RunConfig::load(path)?.merged_over(flags)),
        None => Ok(flags),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Design(args) => {
            let cfg = resolve(args.config.as_ref(), args.as_config())?;
            commands::run_design(&cfg, &args.out)
        }
        Command::Simulate(args) => {
            let cfg = resolve(args.config.as_ref(), args.as_config())?;
            commands::run_simulate(&args.controls, &cfg, &args.out)
        }
        Command::Scan(args) => {
            let cfg = resolve(args.config.as_ref(), args.as_config())?;
            commands::run_scan(&args.controls, &cfg, &args.out)
        }
        Command::Reproduce(args) => commands::run_reproduce(&args.figure, &args.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
