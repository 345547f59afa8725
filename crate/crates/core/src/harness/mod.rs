//! Experiment configuration, execution, CSV output and rate fitting.

pub mod config;
pub mod experiment;
pub mod fit;
pub mod output;

pub use config::{expand_sweep, Algorithm, ExperimentConfig, GraphSpec, NoiseSpec, ProblemSpec, SeedSpec};
pub use experiment::{aggregate_runs, write_outputs, Experiment};
pub use fit::{fit_rate, fit_rate_csv, RateFit};
pub use output::{aggregate, aggregate_csv, trajectory_csv, CsvTable};
