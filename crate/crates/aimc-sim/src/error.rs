//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid response model: {0}")]
    InvalidResponse(String),

    #[error("no symmetric point: {0}")]
    NoSymmetricPoint(String),

    #[error("quadrature did not converge: requested tol {requested:.3e}, achieved {achieved:.3e}")]
    QuadratureNoConvergence { requested: f64, achieved: f64 },

    #[error("invalid pulse config: {0}")]
    InvalidPulseConfig(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("optimizer has no residual array")]
    MissingResidualArray,

    #[error("optimizer has no digital buffer")]
    MissingBuffer,

    #[error("empty batch")]
    EmptyBatch,

    #[error("bad magic in {path}: got {got:#010x}, want {want:#010x}")]
    BadMagic {
        path: String,
        got: u32,
        want: u32,
    },

    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("truncated file {path}: need {need} bytes, have {have}")]
    TruncatedFile {
        path: String,
        need: usize,
        have: usize,
    },

    #[error("singular linear system")]
    SingularSystem,

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("unknown algorithm `{name}`; known: {known}")]
    UnknownAlgorithm { name: String, known: String },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
