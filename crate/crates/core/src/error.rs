use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no rank-{rank} polynomial null-space basis up to degree {max_deg}")]
    NullspaceDegreeExceeded { rank: usize, max_deg: usize },

    #[error("matrix pencil is not regular (det(λM - N) vanishes identically)")]
    DegeneratePencil,

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("QP infeasible at x = {state:?}; violated constraints {violated:?}")]
    Infeasible { state: Vec<f64>, violated: Vec<usize> },

    #[error("unsupported degenerate configuration: {0}")]
    UnsupportedDegenerate(String),

    #[error("compatibilization failed after {rounds} penalty rounds: {diagnostics}")]
    CompatibilizationFailed { rounds: usize, diagnostics: String },

    #[error("CLF shape Hessian lost positive definiteness (min eigenvalue {min_eig:e})")]
    ShapeDegenerate { min_eig: f64 },

    #[error("scenario validation failed: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
