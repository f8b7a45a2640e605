//! Experiment driver: configuration, runs, CSV tables and summaries.

mod config;
mod run;
mod summary;

use thiserror::Error;

pub use config::{parse_config, Convection, Experiment, ExperimentConfig};
pub use run::{final_matrix, run, write_csv, CsvRow, RunOutput, CSV_COLUMNS};
pub use summary::{read_csv, summarize, summarize_rows};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed CSV: {0}")]
    Malformed(String),
    #[error("no data")]
    NoData,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit status: 2 for bad input, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Malformed(_) | HarnessError::NoData => 2,
            HarnessError::Numerical(_) | HarnessError::Io(_) => 3,
        }
    }
}
