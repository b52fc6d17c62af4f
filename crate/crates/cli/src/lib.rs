//! Command-line front end for the `nonlocal-heat` solver: TOML problem
//! definitions, and CSV output for solves, estimate checks and sweeps.

// `!(x > 0.0)` style checks are kept so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{
    cmd_solve, cmd_sweep, cmd_verify, CliError, SweepOutcome, SweepRow, EXIT_INVALID,
    EXIT_NOT_CONVERGED, EXIT_OK,
};
pub use config::{ConfigError, ConfigFile, Overrides, RunConfig, Tweaks};

/// Environment variable that overrides `--out`.
pub const OUT_ENV: &str = "NONLOCAL_HEAT_OUT";
