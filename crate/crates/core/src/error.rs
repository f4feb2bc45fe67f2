use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate graph: node {node} has zero degree")]
    DegenerateGraph { node: usize },

    #[error("numerical failure at iteration {iteration}: {reason} (iterate: {iterate:?})")]
    NumericalFailure {
        iteration: usize,
        reason: String,
        iterate: Vec<f64>,
    },

    #[error("invalid reference: {0}")]
    InvalidReference(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error in {path} at row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("interpolation failure: node {node} is not reachable from any valid node")]
    InterpolationFailure { node: usize },

    #[error("generation failure: {0}")]
    GenerationFailure(String),

    #[error("infeasible distance: no node pair at exactly {hops} hops")]
    InfeasibleDistance { hops: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable, machine-parsable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::InvalidInput(_) => "invalid-input",
            Error::DegenerateGraph { .. } => "degenerate-graph",
            Error::NumericalFailure { .. } => "numerical-failure",
            Error::InvalidReference(_) => "invalid-reference",
            Error::Schema(_) => "schema",
            Error::Parse { .. } => "parse",
            Error::InterpolationFailure { .. } => "interpolation-failure",
            Error::GenerationFailure(_) => "generation-failure",
            Error::InfeasibleDistance { .. } => "infeasible-distance",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
