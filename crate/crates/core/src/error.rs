use thiserror::Error;

/// Errors raised by the core model, formulas, codecs and harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside the range an operation accepts.
    #[error("configuration error: {0}")]
    Config(String),

    /// A probability or threshold argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A non-finite value was produced or supplied.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The codec does not support the requested channel (e.g. noisy feedback).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The split P1 + (D-1) P2 = D P with P1 = P2 + 1 has no positive solution.
    #[error("infeasible power split: D={rounds}, S={snr}")]
    InfeasibleSplit { rounds: usize, snr: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
