//! `aplab` — configure problems, minimize, analyze stored fields, and run
//! the acceptance battery.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use aplab_core::ApError;
use clap::{Args, Parser, Subcommand};

use commands::Ctx;

#[derive(Parser)]
#[command(
    name = "aplab",
    version,
    about = "Energy minimization and free-boundary analysis on uniform grids"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (sectioned key=value file)
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's [output] dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recorded in output manifests for provenance
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Minimize the configured energy; write the solution field and an
    /// iteration log
    Minimize(RunArgs),
    /// Fit growth exponents at free-boundary points of a stored field
    Growth {
        #[command(flatten)]
        run: RunArgs,
        /// Field file to analyze
        #[arg(long)]
        field: PathBuf,
        /// `auto` (free-boundary cells, at most 64) or `x,y;x,y;...`
        #[arg(long, default_value = "auto")]
        centers: String,
    },
    /// Evaluate the adjusted boundary-energy series at one center
    Weiss {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        field: PathBuf,
        /// Center `x,y` (or `x` in 1D)
        #[arg(long)]
        center: String,
    },
    /// Rescale around a center and classify the limiting profile
    Blowup {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        center: String,
    },
    /// Run the acceptance battery (exit 0 iff every criterion passes)
    Suite {
        /// Single criterion id, e.g. A3
        #[arg(long)]
        only: Option<String>,
    },
}

/// 0 ok, 2 usage/parse/io, 3 empty result, 4 property violation, 1 internal.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ApError>() {
        Some(
            ApError::Parse(_)
            | ApError::Io(_)
            | ApError::InvalidParam(_)
            | ApError::InvalidGrid(_)
            | ApError::InvalidCoefficients(_)
            | ApError::GridMismatch(_)
            | ApError::BoundaryMismatch(_)
            | ApError::RegionOutsideDomain(_)
            | ApError::NonFinite(_),
        ) => 2,
        Some(ApError::EmptyPositivitySet | ApError::NoInteriorFreeBoundary(_)) => 3,
        Some(ApError::NotConverged(_) | ApError::Diverged(_)) => 4,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.cmd {
        Cmd::Minimize(run) => {
            let ctx = Ctx::new(&run.config, run.out, run.seed)?;
            commands::cmd_minimize(&ctx)
        }
        Cmd::Growth { run, field, centers } => {
            let ctx = Ctx::new(&run.config, run.out, run.seed)?;
            commands::cmd_growth(&ctx, &field, &centers)
        }
        Cmd::Weiss { run, field, center } => {
            let ctx = Ctx::new(&run.config, run.out, run.seed)?;
            commands::cmd_weiss(&ctx, &field, &center)
        }
        Cmd::Blowup { run, field, center } => {
            let ctx = Ctx::new(&run.config, run.out, run.seed)?;
            commands::cmd_blowup(&ctx, &field, &center)
        }
        Cmd::Suite { only } => commands::cmd_suite(only.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
