//! Error-rate and timing harness for the filters in `qht-core`.
//!
//! Every run feeds one stream to a fresh filter and to an exact
//! [`GroundTruthOracle`]; disagreements are counted as false positives
//! (unseen elements answered `Duplicate`) or false negatives (duplicates
//! answered `Unseen`). The oracle keeps every element it has seen, which is
//! fine for a harness that is not itself memory-bound.

pub mod cli;
pub mod csvio;
pub mod oracle;
pub mod report;
pub mod runner;
pub mod spec;

use qht_core::{AnalysisError, ParamError, StreamError};
use thiserror::Error;

pub use csvio::{emit_csv, read_csv, write_csv, CsvRow};
pub use oracle::GroundTruthOracle;
pub use report::{ErrorCounts, ErrorReport};
pub use runner::{run_benchmark, run_timing, Timing};
pub use spec::{AnyFilter, FilterKind, FilterSpec, StreamSource};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl BenchError {
    /// Process exit code: 2 for configuration problems, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Param(_) | BenchError::Analysis(_) => 2,
            BenchError::Stream(StreamError::LineTooLong { .. }) => 2,
            BenchError::Stream(_) | BenchError::Io { .. } | BenchError::Csv(_) => 3,
        }
    }
}
