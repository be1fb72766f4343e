//! Benchmark harness: grid sweeps over step-size guesses, the result CSV,
//! and a command-line front end.

pub mod algorithms;
pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod output;
pub mod suite;
pub mod workload;

pub use algorithms::Algorithm;
pub use error::{BenchError, Result};
pub use grid::{run_grid, GridSpec};
pub use output::ResultRow;
