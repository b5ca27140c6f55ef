//! Command-line front end for the credfolio agent.

pub mod args;
pub mod commands;
pub mod prompt;
pub mod render;

use std::io::{BufRead, Write};

use clap::Parser;

use crate::args::Cli;
use crate::prompt::{Prompter, UsageError};

/// Parses `argv`, runs the command and returns the exit status:
/// 0 success, 1 operation failure, 2 usage error.
pub fn dispatch<I, T>(argv: I, stdin: impl BufRead, stdout: &mut impl Write, stderr: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = if e.use_stderr() {
                write!(stderr, "{e}")
            } else {
                write!(stdout, "{e}")
            };
            return e.exit_code();
        }
    };
    let mut prompter = Prompter::new(stdin, &mut *stderr);
    let result = commands::run(cli, stdout, &mut prompter);
    drop(prompter);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}
