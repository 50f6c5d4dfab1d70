use thiserror::Error;

/// Errors raised by the solver and its analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("series diverges: {0}")]
    Divergence(String),

    #[error("root-find did not converge: {message} (bracket [{lo}, {hi}])")]
    Numerical { message: String, lo: f64, hi: f64 },

    #[error("kernel tables need {required_bytes} bytes, budget is {budget_bytes}")]
    Resource {
        required_bytes: u64,
        budget_bytes: u64,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
