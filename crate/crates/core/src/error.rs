use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("sampling mask coverage unsatisfiable: {ones} ones cannot cover {rows} rows and {cols} columns")]
    CoverageUnsatisfiable { ones: usize, rows: usize, cols: usize },

    #[error("sampling mask coverage not reached after {0} draws")]
    CoverageExhausted(usize),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("cost matrix contains NaN")]
    NanCost,

    #[error("{0}")]
    Invalid(String),

    #[error("I/O error on {path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
