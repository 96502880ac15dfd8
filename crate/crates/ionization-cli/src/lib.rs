//! Batch driver for the ionization library: configuration, subcommand
//! dispatch, CSV/JSON output and reproducible run manifests.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_args, parse_config, ConfigError, Format, Method, ParseFailure, RunConfig, Subcommand};
pub use output::{write_output, Table};
pub use run::{run, RunError, RunManifest};
