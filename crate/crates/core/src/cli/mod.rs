//! Configuration format, CSV output and the subcommand runner.

pub mod config;
pub mod output;
pub mod run;

pub use config::{RunConfig, SweepMode};
pub use output::{config_hash, csv_body, CsvTable, Provenance, INCOMPLETE_MARKER, SCHEMA_VERSION};
pub use run::{oracle_deltas, read_sweep, run, Command, OracleDeltas, RunOptions, RunReport};
