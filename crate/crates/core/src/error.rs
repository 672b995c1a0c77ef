use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the factorization engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index ({j}, {k}, {l}) out of bounds for dims ({}, {}, {})", dims.0, dims.1, dims.2)]
    IndexOutOfBounds {
        j: usize,
        k: usize,
        l: usize,
        dims: (usize, usize, usize),
    },

    #[error("duplicate entry ({j}, {k}, {l}){}", line.map(|n| format!(" at line {n}")).unwrap_or_default())]
    DuplicateEntry {
        j: usize,
        k: usize,
        l: usize,
        line: Option<usize>,
    },

    #[error("tensor has no observed entries")]
    EmptyTensor,

    #[error("non-finite value {0}")]
    NonFinite(f64),

    #[error("{}: line {line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("dense size {cells} exceeds cap {cap}")]
    SizeCap { cells: usize, cap: usize },

    #[error("numerical failure at iteration {iter}: {msg}")]
    Numerical { iter: usize, msg: String },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
