//! `nilwalk`: filtration analysis, walk simulation and exact oracles from a JSON config.
//!
//! Exit codes: 0 success, 1 other failure, 2 invalid config, 3 unsupported backend,
//! 4 budget exceeded (partial results are written with `"truncated": true`).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Command, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "nilwalk", version, about = "Return-probability exponents of heavy-tailed walks on nilpotent groups")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory for the JSON report, CSV series and resolved config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Wall-clock budget; exceeding it flushes partial results and exits with code 4.
    #[arg(long, global = true)]
    budget_seconds: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Weighted filtration, ranks, D exponents and the predicted regime.
    Analyze,
    /// Collision estimates of the return probability over a horizon grid, with a slope fit.
    Simulate,
    /// Coordinates and radius of one element in the greedy commutator basis.
    Norm,
    /// Predicted ball volumes against box counts and word balls.
    Volume,
    /// Exact tables: convolutions, Witt counts, box counts, Smith invariants.
    Oracle,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Command {
        match s {
            Sub::Analyze => Command::Analyze,
            Sub::Simulate => Command::Simulate,
            Sub::Norm => Command::Norm,
            Sub::Volume => Command::Volume,
            Sub::Oracle => Command::Oracle,
        }
    }
}

/// A failed run: exit code and diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn schema(msg: impl Into<String>) -> Failure {
        Failure { code: 2, message: msg.into() }
    }

    pub fn other(msg: impl Into<String>) -> Failure {
        Failure { code: 1, message: msg.into() }
    }
}

impl From<nilwalk::Error> for Failure {
    fn from(e: nilwalk::Error) -> Failure {
        let code = match e {
            nilwalk::Error::InvalidArgument(_) => 2,
            nilwalk::Error::Unsupported(_) => 3,
            nilwalk::Error::ResourceLimit(_) => 4,
            nilwalk::Error::BackendMismatch(_) | nilwalk::Error::NotInSpan(_) => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let path = cli.config.ok_or_else(|| Failure::schema("--config <path> is required"))?;
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::schema(format!("{}: {e}", path.display())))?;
    let overrides = Overrides { seed: cli.seed, workers: cli.workers, out: cli.out, budget_seconds: cli.budget_seconds };
    let cfg = RunConfig::parse(&text)?.resolve(cli.command.into(), &overrides)?;
    commands::execute(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("nilwalk: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
