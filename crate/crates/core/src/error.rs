use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} must be positive, got {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid hypermodel: {0}")]
    InvalidHypermodel(String),

    #[error("marginal mean is infinite: beta + 1/r = {0} <= 0")]
    InfiniteMean(f64),

    #[error("no closed-form lambda update for r = {0}; use the ODE path")]
    UnsupportedClosedForm(f64),

    #[error("ODE evaluation points must be sorted ascending and non-negative (index {index})")]
    Unsorted { index: usize },

    #[error("ODE integration produced a non-finite state at t = {t}")]
    Integration { t: f64 },

    #[error("hyperparameter matching infeasible for r = {r}: {reason}")]
    MatchingInfeasible { r: f64, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("column {0} of the forward map is zero")]
    ZeroColumn(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("chain initial point has non-finite potential ({0})")]
    InitNotFinite(f64),

    #[error("{0}")]
    Invalid(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },

    #[error("missing artifact {}: {hint}", path.display())]
    MissingArtifact { path: PathBuf, hint: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.to_string(),
        }
    }
}
