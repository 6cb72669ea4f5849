//! Experiment runner: JSON specifications in, CSV / JSON reports and SVG
//! charts out.

// `!(a < b)` is used on purpose so NaN bounds are caught too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

pub mod plot;
pub mod report;
pub mod run;
pub mod spec;

pub use report::{Report, Row, Series};
pub use run::{run_experiment, write_outputs};
pub use spec::{Command, ExperimentSpec, Format, Resolved};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid specification: {0}")]
    Schema(String),

    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, std::io::Error),

    #[error("malformed report: {0}")]
    Report(String),

    #[error(transparent)]
    Model(#[from] sln_gbm::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        2
    }
}
