use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate key `{key}` on lines {first} and {second}")]
    DuplicateKey {
        key: String,
        first: usize,
        second: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("time step {dt:e} exceeds the CFL limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("numerical integration failed on [{a}, {b}]: {msg}")]
    Quadrature { a: f64, b: f64, msg: String },

    #[error("remap called off schedule at t = {t} (interval {interval})")]
    RemapSchedule { t: f64, interval: f64 },

    #[error("checkpoint {path:?}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },

    #[error("threshold bracket: {0}")]
    Bracket(String),

    #[error("fit: {0}")]
    Fit(String),

    #[error("campaign integrity: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
