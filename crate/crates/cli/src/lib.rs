//! Front end for the `qot` binary: config parsing, dispatch and output files.

pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use config::{parse_config, parse_config_in, Mode, RunConfig};
pub use error::CliError;
pub use run::{load_config, run, run_selftest, Outcome, RunOptions};

/// Exit status for a converged run.
pub const EXIT_CONVERGED: u8 = 0;
/// Exit status for any error, reported on stderr.
pub const EXIT_ERROR: u8 = 1;
/// Exit status for a run that finished without converging.
pub const EXIT_NOT_CONVERGED: u8 = 2;
