use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("provenance mismatch: {what} (expected {expected}, found {found})")]
    Provenance {
        what: String,
        expected: String,
        found: String,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },

    #[error("micro evaluation failed at macro element {element}, gauss point {gauss_point}: {source}")]
    Evaluator {
        element: usize,
        gauss_point: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("micro solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("zero reference norm")]
    ZeroReference,

    #[error("malformed file {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("config: {0}")]
    Config(String),

    #[error("unknown macro case '{0}'")]
    UnknownCase(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
