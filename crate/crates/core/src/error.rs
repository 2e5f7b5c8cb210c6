use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violated a precondition (shape mismatch,
    /// out-of-range parameter, malformed input).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Coefficient-expression parse failure with source position.
    #[error("{message} (line {line}, column {column})")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A volatility matrix fell outside the admissible box.
    #[error(
        "inadmissible volatility: eigenvalue {eigenvalue} outside [{lo}, {hi}] (policy {context})"
    )]
    Admissibility {
        eigenvalue: f64,
        lo: f64,
        hi: f64,
        context: String,
    },

    /// State blow-up during simulation. Almost always a coefficient
    /// misconfiguration rather than genuine finite-time explosion.
    #[error("path {path} diverged at t = {t}: |X| = {magnitude:.3e} exceeds 1e12")]
    Divergence { path: usize, t: f64, magnitude: f64 },

    /// Numerical routine could not deliver its contract (e.g. square root
    /// of a matrix with a significantly negative eigenvalue).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
