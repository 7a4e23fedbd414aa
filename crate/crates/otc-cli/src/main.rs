//! `otc` — steady states, prices, stability reports and agent
//! simulations for two-sided OTC market models, driven by a flat
//! key=value config and emitting CSV.

use clap::{Parser, Subcommand};
use otc_cli::commands;
use otc_cli::{CliError, Options, RunConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "otc",
    about = "Solvers and simulators for multi-asset OTC market models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the key=value run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solver tolerance on the master-equation residual.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Round output values to this many decimals (half-even).
    #[arg(long)]
    round: Option<usize>,
    /// Override the config seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state proportions per asset (plus summary row).
    Steady(CommonArgs),
    /// Reservation values, prices and intrinsic values.
    Price(CommonArgs),
    /// Steady states and prices across a meeting-intensity grid.
    Sweep(CommonArgs),
    /// Forward integration of the master equation.
    Simulate(CommonArgs),
    /// Jacobian spectrum and Routh-Hurwitz report at the steady state.
    Stability(CommonArgs),
    /// Finite-population Markov-chain simulation with ODE comparison.
    Mc(CommonArgs),
}

fn run(args: &CommonArgs, f: impl Fn(&RunConfig, &Options) -> Result<String, CliError>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)?;
    let config = RunConfig::parse(&text)?;
    let opts = Options {
        tol: args.tol,
        round: args.round,
        seed: args.seed,
    };
    let csv = f(&config, &opts)?;
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Steady(a) => run(a, commands::cmd_steady),
        Command::Price(a) => run(a, commands::cmd_price),
        Command::Sweep(a) => run(a, commands::cmd_sweep),
        Command::Simulate(a) => run(a, commands::cmd_simulate),
        Command::Stability(a) => run(a, commands::cmd_stability),
        Command::Mc(a) => run(a, commands::cmd_mc),
    };
    if let Err(e) = result {
        eprintln!("otc: {e}");
        std::process::exit(e.exit_code());
    }
}
