use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or specification violates its admissible domain.
    #[error("constraint violation: {0}")]
    Constraint(String),

    /// A call was made outside the operation's domain (e.g. horizon past a maturity).
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller broke a documented precondition (non-nested fits, ordering, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure at step {step}: {detail}")]
    Numerical { step: usize, detail: String },

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("config error: {0}")]
    Config(String),

    /// Malformed input data, with the 1-based line number when known.
    #[error("data error{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Data { line: Option<usize>, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn numerical(step: usize, detail: impl Into<String>) -> Self {
        Error::Numerical {
            step,
            detail: detail.into(),
        }
    }

    pub(crate) fn data(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Data {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
