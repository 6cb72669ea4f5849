use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {0} is not supported (need n >= 2)")]
    Dimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is singular (pivot {pivot:e} below 1e-300)")]
    Singular { pivot: f64 },

    #[error("{what} must be symmetric (relative asymmetry {asym:e})")]
    NotSymmetric { what: &'static str, asym: f64 },

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("range error: {what}; maximal admissible tau is {max_tau}")]
    Range { what: String, max_tau: f64 },

    #[error("empty horizon: tau_end must be positive")]
    EmptyHorizon,

    #[error("invalid trajectory configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
