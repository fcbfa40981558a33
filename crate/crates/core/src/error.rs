use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the weight function domain")]
    Domain { x: f64, y: f64 },

    #[error("exp overflow: lambda * psi = {exponent:.6e} at ({x}, {y}, t = {t})")]
    Overflow { exponent: f64, x: f64, y: f64, t: f64 },

    #[error("weight construction failed: {condition} at ({x}, {y})")]
    Construction { condition: String, x: f64, y: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown manufactured solution id `{0}`")]
    UnknownProblem(String),

    #[error("singular trace system (|det| = {det:.3e})")]
    SingularTrace { det: f64 },

    #[error("CG stagnated after {iterations} iterations (relative residual {last:.3e})")]
    Stagnation {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("fit needs at least 3 usable points, got {0}")]
    InsufficientPoints(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// True for errors that stem from bad user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParams(_)
                | Error::UnknownProblem(_)
                | Error::Construction { .. }
                | Error::Geometry(_)
                | Error::Domain { .. }
                | Error::Format { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
