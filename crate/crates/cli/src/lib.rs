//! Command-line front end for `bodyorient_core` and the HTTP labelling service.
//!
//! [`run`] parses arguments, writes `<out-dir>/<command>-seed<N>.config.json` and executes the
//! command. Exit codes: 0 on success, 1 for invalid arguments or input data, 2 for runtime
//! failures such as I/O errors or a diverging training run.

mod args;
mod commands;
pub mod service;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use args::{Cli, Command};
pub use commands::Prediction;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// A problem with the arguments or input files rather than with the machine.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Invalid(pub String);

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match commands::execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let code = exit_code(&e);
            let kind = if code == EXIT_INVALID {
                "invalid input"
            } else {
                "runtime failure"
            };
            let mut stderr = std::io::stderr().lock();
            let _ = writeln!(stderr, "error ({kind}) in `{}`: {e:#}", cli.command.name());
            code
        }
    }
}

/// Maps an error chain to an exit code.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    use bodyorient_core::Error as CoreError;
    for cause in e.chain() {
        if cause.downcast_ref::<Invalid>().is_some() {
            return EXIT_INVALID;
        }
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::Io(_) | CoreError::NonFiniteLoss { .. } | CoreError::Json(_) => EXIT_RUNTIME,
                _ => EXIT_INVALID,
            };
        }
    }
    EXIT_RUNTIME
}
