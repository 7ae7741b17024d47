use thiserror::Error;

/// Errors raised by the model, the solvers and the experiment harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("point is off the unit-modulus manifold (entry {index}, modulus {modulus})")]
    OffManifold { index: usize, modulus: f64 },

    #[error("degenerate retraction at entry {0}")]
    DegenerateRetraction(usize),

    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },

    #[error("MSE must be positive, got {0}")]
    NonPositiveMse(f64),

    #[error("SINR targets cannot be met")]
    Infeasible,

    #[error("invalid mode specification: {0}")]
    InvalidMode(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
