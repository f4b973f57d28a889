//! `polariton`: solves, field maps, limit studies and the verification battery.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 invalid input or
//! configuration, 3 solver failure.

mod commands;
mod output;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use commands::{CliError, Context, Outcome};

#[derive(Debug, Parser)]
#[command(name = "polariton", version, about = "Plasmon-polariton eigenmodes of finite absorbing media")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's `output.dir`.
    #[arg(long, global = true, env = "POLARITON_OUT")]
    out: Option<PathBuf>,

    /// Worker threads; overrides the config's `workers`.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve every mode and write the modes dataset.
    Solve,
    /// Electric-field coefficients of every mode at exterior points.
    FieldMap {
        /// CSV with an `x,y,z` header.
        #[arg(long)]
        points: PathBuf,
    },
    /// Run the verification battery and write the verdict.
    Verify,
    /// Family norms of the field map under coupling or volume scaling.
    LimitStudy,
    /// Dense eigendecomposition against the mode inventory.
    OracleCompare,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::FieldMap { .. } => "field-map",
            Command::Verify => "verify",
            Command::LimitStudy => "limit-study",
            Command::OracleCompare => "oracle-compare",
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let ctx = Context::load(cli.command.name(), cli.config.as_deref(), cli.out, cli.workers)?;
    match &cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::FieldMap { points } => commands::field_map(&ctx, points),
        Command::Verify => commands::verify(&ctx),
        Command::LimitStudy => commands::limit_study(&ctx),
        Command::OracleCompare => commands::oracle_compare(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
