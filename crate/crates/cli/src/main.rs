//! `bdspectral`: solve, verify, simulate and export exactly solvable
//! birth-death chains.
//!
//! Exit codes: 0 success, 1 verification failure, 2 domain or usage error,
//! 3 I/O error. Errors are also printed to stderr as JSON.

mod commands;
mod config;
mod error;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Initial, MirrorMode, SolveMode};
use config::ScenarioArgs;
use error::CliError;
use output::{Sidecar, Sink};

#[derive(Debug, Parser)]
#[command(name = "bdspectral", version, about = "Exactly solvable birth-death chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Table of the available families.
    List,
    /// Stationary distribution, evolution or transition matrix of a chain.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Directory for the CSV and JSON files; stdout/stderr otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(subcommand)]
        mode: SolveMode,
    },
    /// Check the closed forms against numeric and Monte-Carlo oracles.
    Verify {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(value_enum)]
        level: verify::Level,
        /// Walks of the Monte-Carlo check (full level only).
        #[arg(long, default_value_t = 100_000)]
        walks: u64,
        /// Steps of each Monte-Carlo walk.
        #[arg(long, default_value_t = 25)]
        steps: u64,
        /// Negative control: perturbs every d_n^2 so orthogonality fails.
        #[arg(long, hide = true)]
        corrupt_dn2: bool,
    },
    /// Monte-Carlo walks compared with the closed-form distribution.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 25)]
        steps: u64,
        #[arg(long, default_value_t = 100_000)]
        walks: u64,
        #[arg(long, default_value = "delta:0")]
        from: Initial,
    },
    /// Reflected and accelerated chains of a mirror-symmetric family.
    Mirror {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(subcommand)]
        mode: MirrorMode,
    },
    /// Rates of the dual system `B^d(x) = D(N-x)`, `D^d(x) = B(N-x)`.
    Dual {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// `d_n^2` factor applied by `--corrupt-dn2`.
const CORRUPTION: f64 = 1.001;

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::List => {
            print!("{}", commands::list());
            Ok(())
        }
        Command::Solve { scenario, out, mode } => {
            let config = scenario.resolve()?;
            commands::solve(&config, &mode, &Sink::new(out)?)
        }
        Command::Verify {
            scenario,
            out,
            level,
            walks,
            steps,
            corrupt_dn2,
        } => {
            let config = scenario.resolve()?;
            let fam = config.family()?;
            let basis = config.basis()?;
            let opts = verify::Options {
                level,
                seed: config.seed,
                walks,
                steps,
                dn2_factor: if corrupt_dn2 { CORRUPTION } else { 1.0 },
            };
            let report = verify::run(&fam, &basis, opts)?;
            for c in &report.checks {
                println!(
                    "{} {:<16} {:.3e} (tolerance {:.0e}) {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance,
                    c.detail
                );
            }
            let failures = report.failures();
            if let Some(dir) = out {
                Sink::new(Some(dir))?.json("verify", &Sidecar::new("verify", &config, &basis, &report))?;
            }
            if failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::VerifyFailed(failures))
            }
        }
        Command::Simulate {
            scenario,
            out,
            steps,
            walks,
            from,
        } => {
            let config = scenario.resolve()?;
            commands::simulate_cmd(&config, steps, walks, &from, &Sink::new(out)?)
        }
        Command::Mirror { scenario, out, mode } => {
            let config = scenario.resolve()?;
            commands::mirror(&config, &mode, &Sink::new(out)?)
        }
        Command::Dual { scenario, out } => {
            let config = scenario.resolve()?;
            commands::dual(&config, &Sink::new(out)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
