//! Library half of the `ecnn` command: argument parsing, the subcommands,
//! model files and run-summary reports.

pub mod commands;
pub mod error;
pub mod model_file;
pub mod report;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use commands::Cli;
pub use error::CliError;
pub use model_file::{ModelFile, FORMAT_VERSION};

/// Parses `args` (program name first) and runs the command.
///
/// Returns the process exit code: 0 success, 1 usage error, 2 data error,
/// 3 internal error.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    match commands::execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
