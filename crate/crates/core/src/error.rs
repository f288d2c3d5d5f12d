use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("degenerate triangle {index} (area {area:e})")]
    DegenerateElement { index: usize, area: f64 },

    #[error("meshes are not in the same refinement chain")]
    NotNested,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported quadrature degree {0} (supported: 1, 2, 4, 6)")]
    UnsupportedQuadrature(usize),

    #[error("conductivity tensor of element {element} is not symmetric positive definite")]
    NotSpd { element: usize },

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("linear solve residual {residual:e} exceeds {bound:e}")]
    LinearSolve { residual: f64, bound: f64 },

    #[error("Newton iteration did not converge in {iterations} iterations (last increment {increment:e})")]
    NewtonDivergence { iterations: usize, increment: f64 },

    #[error("time step {step} failed: {source}")]
    TimeStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("non-finite value in column `{column}`, row {row}")]
    NonFinite { column: String, row: usize },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for the failure category. Documented in the README.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::ConfigParse { .. } => 2,
            Error::Io { .. } | Error::Csv(_) | Error::Format { .. } | Error::NonFinite { .. } => 3,
            Error::Mesh(_)
            | Error::DegenerateElement { .. }
            | Error::NotNested
            | Error::DimensionMismatch { .. }
            | Error::UnsupportedQuadrature(_)
            | Error::NotSpd { .. } => 4,
            Error::SingularMatrix(_) | Error::LinearSolve { .. } => 5,
            Error::NewtonDivergence { .. } => 6,
            Error::TimeStep { source, .. } => source.exit_code(),
        }
    }
}
