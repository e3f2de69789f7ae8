//! Experiment runner for near-critical branching processes with dependent
//! immigration.
//!
//! A run reads a TOML experiment description, executes it on a worker pool and
//! writes an append-only run directory: the effective config, CSV tables, SVG
//! charts, a text summary and finally `manifest.json`. A directory without a
//! manifest is an incomplete run.

pub mod error;
pub mod output;
pub mod plot;
pub mod run;

pub use error::CliError;
pub use run::{execute, load_config, parse_config, RunOptions, RunOutcome};
