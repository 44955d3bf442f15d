//! Command-line front end: corpus generation, trace fitting, validation,
//! calibration and metrics, plus the file formats they share.

pub mod args;
pub mod commands;
pub mod error;
pub mod formats;
pub mod manifest;

pub use args::{Cli, Command};
pub use error::CliError;

/// Runs one parsed command. `argv` is recorded in the run manifest.
pub fn run(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(a) => commands::generate(a, argv),
        Command::Fit(a) => commands::fit(a, argv),
        Command::Validate(a) => commands::validate(a, argv),
        Command::Calibrate(a) => commands::calibrate(a, argv),
        Command::Metrics(a) => commands::metrics(a, argv),
    }
}
