//! The `courtpose` command-line tool.
//!
//! Exit codes: 0 on success, 1 on domain errors (degenerate calibration,
//! empty tracks, unrecoverable poses), 2 on usage, I/O and parse errors.
//! Every failure prints one `error: ...` line on standard error.

mod args;
mod commands;
mod render;

use std::fmt::Display;
use std::io::Write;
use std::path::Path;

use clap::Parser;

pub use args::{Cli, Command};
pub use commands::HomographyFile;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Display) -> Self {
        Self { code: 2, message: message.to_string() }
    }

    pub fn domain(message: impl Display) -> Self {
        Self { code: 1, message: message.to_string() }
    }
}

pub(crate) fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))
}

pub(crate) fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run(argv: &[String]) -> i32 {
    match try_run(argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn try_run(argv: &[String]) -> Result<(), CliError> {
    let argv = args::expand_config(argv)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(std::io::stdout(), "{e}");
                return Ok(());
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::usage(first.trim_start_matches("error: ")));
        }
    };
    let mut out = std::io::stdout().lock();
    commands::dispatch(cli.command, &mut out)
}
