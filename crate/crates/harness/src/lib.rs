//! Experiment harness: CartPole and tabular-MDP training runs over the
//! method × stabilizer grid, learning-curve outputs and the oracle audit.

pub mod audit;
pub mod config;
pub mod output;
pub mod run;
pub mod stats;

use std::path::PathBuf;

use thiserror::Error;

pub use audit::run_audit;
pub use config::{EnvChoice, Method, RunConfig, Stabilizer};
pub use output::emit_outputs;
pub use run::{run_experiment, run_grid, RunRecord, SeedRun};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no run records to write")]
    EmptyRecords,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Env(#[from] pgsom_core::env::EnvError),
    #[error(transparent)]
    Estimator(#[from] pgsom_core::estimator::EstimatorError),
    #[error(transparent)]
    Optim(#[from] pgsom_core::optim::OptimError),
    #[error(transparent)]
    Oracle(#[from] pgsom_core::oracle::OracleError),
}
