//! `hvsis`: command-line front end for the human-vector SIS contagion
//! toolkit. Every subcommand reads one flat JSON configuration (a file
//! path or `-` for standard input) and writes a CSV or JSON report to
//! standard output or `--out`. Outputs are byte-deterministic: fixed key
//! order, fixed float formatting, LF line endings.

use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

mod commands;
mod config;
mod jsonout;

/// Failures are split by exit code: validation problems (bad or missing
/// configuration) exit 2, runtime problems (solver or output failures)
/// exit 1.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hvsis",
    version,
    about = "Simulation, stability analysis, and intervention planning \
             for a human-vector SIS contagion model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a flat JSON configuration file, or '-' for standard input.
    config: String,
    /// Write the report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and emit it as CSV.
    Simulate(CommonArgs),
    /// Thresholds, rest points, eigenvalues, and elasticities as JSON.
    Analyze(CommonArgs),
    /// Controlled threshold and endemic point over a (u1, u2) grid, as CSV.
    Sweep(CommonArgs),
    /// Optimal linear-cost policy over a (c1, c2) grid, as CSV.
    Region(CommonArgs),
    /// Cheapest intervention for one linear cost, as JSON.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        /// Cross-check against an exhaustive N x N lattice search and
        /// report the cost gap.
        #[arg(long, value_name = "N")]
        verify_grid: Option<usize>,
    },
    /// Run the model's invariant checks and report each margin as JSON.
    Verify(CommonArgs),
}

fn write_output(out: &Option<PathBuf>, body: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| CliError::Runtime(format!("cannot write to stdout: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, body, failure) = match &cli.command {
        Command::Simulate(c) => (c, commands::simulate(&config::load(&c.config)?)?, None),
        Command::Analyze(c) => (c, commands::analyze(&config::load(&c.config)?)?, None),
        Command::Sweep(c) => (c, commands::sweep(&config::load(&c.config)?)?, None),
        Command::Region(c) => (c, commands::region(&config::load(&c.config)?)?, None),
        Command::Optimize {
            common,
            verify_grid,
        } => (
            common,
            commands::optimize(&config::load(&common.config)?, *verify_grid)?,
            None,
        ),
        Command::Verify(c) => {
            let (body, failing) = commands::verify(&config::load(&c.config)?)?;
            (c, body, failing)
        }
    };
    write_output(&common.out, &body)?;
    match failure {
        Some(check) => Err(CliError::Runtime(format!(
            "verification failed: {check}"
        ))),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
