use thiserror::Error;

use crate::geometry::Coord;

/// Errors raised by the estimators, predictors and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate {coord} lies outside the grid bounds {bounds}")]
    OutOfBounds { coord: Coord, bounds: Coord },

    #[error("an autoregressive region of support needs p > 0 or q > 0")]
    EmptyModel,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data for {context}: need {needed}, have {got}")]
    InsufficientData {
        context: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("autoregressive fit failed: {0}")]
    Fit(String),

    #[error("unstable autoregressive model: {0}")]
    Instability(String),

    #[error("covariance matrix not positive definite (jitter reached {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("lagged value at {coord} is not observed")]
    Boundary { coord: Coord },

    #[error("cross-validation failed: {0}")]
    CrossValidation(String),

    #[error("simulation diverged at {coord}")]
    Divergence { coord: Coord },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("at position {position}: {source}")]
    AtPosition {
        position: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Input { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at(self, position: usize) -> Self {
        Error::AtPosition {
            position,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
