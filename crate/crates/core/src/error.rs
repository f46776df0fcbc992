use thiserror::Error;

/// Errors surfaced by estimators, tests, and I/O.
///
/// The variants map onto process exit codes in the CLI: `Validation`,
/// `Parse`, and `Domain` are input problems (exit 2); `Numerical` and
/// `NonConvergence` are runtime numerical failures (exit 3).
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a structural precondition.
    #[error("validation: {0}")]
    Validation(String),

    /// A file could not be parsed; carries the 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Arguments are outside the mathematical domain of an operation.
    #[error("domain: {0}")]
    Domain(String),

    /// A numerical operation failed (singular system, overflow, empty
    /// neighborhood, degenerate test).
    #[error("numerical: {0}")]
    Numerical(String),

    /// An iterative fit exhausted its iteration budget or diverged.
    #[error("non-convergence: {0}")]
    NonConvergence(String),

    /// Underlying I/O failure while reading or writing files.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn non_convergence(msg: impl Into<String>) -> Self {
        Error::NonConvergence(msg.into())
    }
}
