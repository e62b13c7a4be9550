//! Experiment harness: grid runs over data sets, summaries, and Monte Carlo
//! decompositions, all emitting CSV.

pub mod config;
pub mod decompose;
pub mod grid;
pub mod summary;

pub use config::{ExperimentConfig, Method, SplitMode, Symbolic};
pub use grid::{expand_grid, read_rows, repeat_seed, run_grid, GridOutcome, GridPoint, GridRow, SCHEMA_VERSION};
pub use summary::{summarize, SummaryRow};
