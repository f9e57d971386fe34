//! Command-line workflows for selection models: CSV ingestion, the JSON run
//! configuration, and the `fit`, `diagnose`, `simulate` and `verify`
//! commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;

pub use commands::{run, FitArtifact};
pub use config::{Cli, RunConfig};
pub use error::CliError;
pub use ingest::{ingest_csv, read_dataset, CsvSpec};
