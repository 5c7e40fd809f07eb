//! Batch experiment runner.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{load_config, parse_config, FieldSource, GridSpec, RunConfig};
pub use experiment::{
    aggregate, load_field, run_experiment, run_experiment_with, run_single, AggregateRow, ExperimentResult,
    ExperimentSetup, RunOutcome,
};
pub use output::{read_aggregate_csv, version_string, write_aggregate_csv, write_results, OutputPaths};
