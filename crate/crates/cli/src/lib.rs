//! `cs-scan`: command-line pipelines for subsampled scan simulation and
//! BPFA reconstruction.
//!
//! [`run`] parses arguments (with optional `--config` files), executes a
//! subcommand and returns the process exit status: 0 on success, 2 for
//! usage or validation errors, 3 for numerical failures.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};
use error::{CliError, CliResult, EXIT_USAGE};

/// Caps the global worker pool at `CS_SCAN_THREADS` when set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("CS_SCAN_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("CS_SCAN_THREADS must be a positive integer, got {value:?}")))?;
    // A pool that already exists (e.g. in tests) is kept as is.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn dispatch(args: Vec<OsString>) -> CliResult<()> {
    let args = config::expand_config(args)?;
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => Ok(()),
                _ => Err(CliError::Usage(String::new())),
            };
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let manifest = config::manifest(Cli::command().find_subcommand(name).expect("known subcommand"), sub);
    configure_threads()?;
    match &cli.command {
        Command::Plan(c) => commands::cmd_plan(c, &manifest),
        Command::Phantom(c) => commands::cmd_phantom(c, &manifest),
        Command::Acquire(c) => commands::cmd_acquire(c, &manifest),
        Command::Reconstruct(c) => commands::cmd_reconstruct(c, &manifest),
        Command::Denoise(c) => commands::cmd_denoise(c, &manifest),
        Command::Evaluate(c) => commands::cmd_evaluate(c),
        Command::Curve(c) => commands::cmd_curve(c, &manifest),
        Command::DoseSeries(c) => commands::cmd_dose_series(c, &manifest),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    match dispatch(args.into_iter().map(Into::into).collect()) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) if msg.is_empty() => EXIT_USAGE,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
