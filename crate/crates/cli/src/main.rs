//! `sc3`: solve, sweep, reproduce and verify SC³ resource allocations.
//!
//! Exit codes: 0 success, 2 configuration error, 3 infeasible, 4 solver
//! non-convergence, 5 failed verification or reproduction check, 1 other.

mod commands;
mod output;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use sc3_core::control::ControlError;
use sc3_core::interloop::InterloopError;
use sc3_core::model::{ModelError, ScenarioError};
use sc3_core::Scheme;

use commands::{CheckFailed, UsageError};
use reproduce::Figure;

/// Environment variable holding the log filter, e.g. `SC3_LOG=debug`.
const LOG_ENV: &str = "SC3_LOG";

#[derive(Parser)]
#[command(
    name = "sc3",
    version,
    about = "Goal-oriented resource allocation for SC³ loops sharing an edge hub"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn scheme(s: &str) -> Result<Scheme, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario with one scheme; writes a per-loop CSV and a JSON summary.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides `solver.scheme` of the scenario.
        #[arg(long, value_parser = scheme)]
        scheme: Option<Scheme>,
        /// CSV path; the summary goes to the same stem with `.summary.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep one scenario parameter over a range for a list of schemes.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Dotted path such as `budget.bandwidth`, `loops.rho` or `loops[2].alpha`.
        #[arg(long)]
        param: String,
        /// Start value; units like `0.6MHz` are accepted.
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        #[arg(long)]
        steps: usize,
        /// Comma-separated schemes; defaults to the scenario's scheme.
        #[arg(long, value_parser = scheme, value_delimiter = ',')]
        scheme: Vec<Scheme>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate the data behind an experiment and check its claims.
    Reproduce {
        #[arg(long, value_enum)]
        figure: Figure,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = reproduce::DEFAULT_SEED)]
        seed: u64,
    },
    /// Compare closed forms and the solver with exhaustive grid search.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        /// Grid points per axis.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Comma-separated loop indices to verify, at most 3 for the inter-loop check.
        #[arg(long, value_delimiter = ',')]
        loops: Option<Vec<usize>>,
        /// Optional JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Test hook: corrupts loop 0's bandwidth before checking.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<InterloopError>() {
            return match e {
                InterloopError::Config(_) => 2,
                InterloopError::Infeasible { .. } => 3,
                _ => 4,
            };
        }
        if cause.downcast_ref::<CheckFailed>().is_some() {
            return 5;
        }
        if cause.downcast_ref::<ScenarioError>().is_some()
            || cause.downcast_ref::<ModelError>().is_some()
            || cause.downcast_ref::<ControlError>().is_some()
            || cause.downcast_ref::<UsageError>().is_some()
            || cause.downcast_ref::<std::io::Error>().is_some()
        {
            return 2;
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { scenario, scheme, out } => commands::solve(&scenario, scheme, &out),
        Command::Sweep {
            scenario,
            param,
            from,
            to,
            steps,
            scheme,
            out,
        } => {
            let from = commands::parse_value(&from)?;
            let to = commands::parse_value(&to)?;
            commands::sweep(&scenario, &param, from, to, steps, &scheme, &out)
        }
        Command::Reproduce { figure, out, seed } => reproduce::reproduce(figure, &out, seed),
        Command::Verify {
            scenario,
            grid,
            loops,
            out,
            inject_fault,
        } => commands::verify(&scenario, grid, loops.as_deref(), inject_fault, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
