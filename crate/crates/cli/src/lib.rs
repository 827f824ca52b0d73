//! Command-line front end for the logdiff solvers: scenario runs, parameter
//! sweeps, the comparison harness, rate fits on saved tables and the
//! verification battery.

pub mod commands;
pub mod error;
pub mod execute;
pub mod output;
pub mod scenario;
pub mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use logdiff_core::analysis::RateModel;

pub use error::{exit, CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "logdiff", version, about = "Logarithmic diffusion with nonlinear Robin boundary data")]
pub struct Cli {
    /// Output directory; defaults to $LOGDIFF_OUT_DIR, then ./out.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file; writes <name>.csv and <name>.summary.json.
    Run { scenario: PathBuf },
    /// Run a scenario once per parameter value, concurrently.
    Sweep {
        scenario: PathBuf,
        /// One of p, gamma, l, n, dt_init.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
    },
    /// Run the built-in verification battery.
    Verify {
        /// Coarse grids and looser tolerances.
        #[arg(long)]
        quick: bool,
    },
    /// Check that the first scenario's solution stays below the second's.
    Compare { low: PathBuf, high: PathBuf },
    /// Fit a rate model to one column of a run CSV.
    Fit {
        csv: PathBuf,
        #[arg(long, value_parser = parse_model)]
        model: RateModel,
        /// `t0,t1`; defaults to the later half in log-time.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
        #[arg(long, default_value = "u_min")]
        column: String,
    },
}

fn parse_model(s: &str) -> Result<RateModel, String> {
    s.parse().map_err(|e: logdiff_core::Error| e.to_string())
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected t0,t1")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(a < b) {
        return Err(format!("empty window {a},{b}"));
    }
    Ok((a, b))
}

/// Executes a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let out = cli.out.unwrap_or_else(output::out_dir);
    let result = match cli.command {
        Command::Run { scenario } => commands::cmd_run(&scenario, &out),
        Command::Sweep { scenario, param, values } => commands::cmd_sweep(&scenario, &param, &values, &out),
        Command::Verify { quick } => commands::cmd_verify(quick),
        Command::Compare { low, high } => commands::cmd_compare(&low, &high, &out),
        Command::Fit { csv, model, window, column } => commands::cmd_fit(&csv, &column, model, window),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
