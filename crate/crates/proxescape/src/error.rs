use thiserror::Error;

/// Library-wide error type.
///
/// `Convergence` carries the best iterate found so callers can inspect or
/// resume from a partial solve.
#[derive(Debug, Error)]
pub enum ProxError {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("oracle evaluation error: {0}")]
    OracleEval(String),

    #[error("inner solver stopped before tolerance: {reason}")]
    Convergence { reason: String, best: Vec<f64> },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed record: {0}")]
    Record(String),
}

pub type Result<T> = std::result::Result<T, ProxError>;

impl ProxError {
    pub fn parameter(msg: impl Into<String>) -> Self {
        ProxError::Parameter(msg.into())
    }

    pub fn oracle(msg: impl Into<String>) -> Self {
        ProxError::OracleEval(msg.into())
    }
}
