//! Command-line driver for `concate-core`: argument and config-file
//! handling, CSV/JSON artifacts and SVG band charts.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod svg;

pub use args::Cli;
pub use error::{CliError, Result};

use args::Command;

/// Runs a parsed command line and returns the text meant for stdout.
pub fn run(mut cli: Cli) -> Result<String> {
    config::apply_file(&mut cli)?;
    let seed = cli.seed;
    let go = move || match &cli.command {
        Command::Describe(a) => commands::describe(a, seed),
        Command::Bounds(a) => commands::bounds(a, seed),
        Command::Scan(a) => commands::scan_cmd(a, seed),
        Command::Simulate(a) => commands::simulate(a, seed),
    };
    match cli.threads {
        None => go(),
        Some(0) => Err(CliError::usage("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::usage(format!("cannot start {n} worker threads: {e}")))?
            .install(go),
    }
}
