use thiserror::Error;

/// Every failure the library can report.
///
/// Variants map onto the CLI exit-code contract through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("kernel singularity: {0}")]
    Singularity(String),
    #[error("precision target not met: {0}")]
    Precision(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("evaluation point too close to the boundary: {0}")]
    NearSingular(String),
    #[error("assembly failed on panel pair ({row}, {col}): {reason}")]
    Assembly {
        row: usize,
        col: usize,
        reason: String,
    },
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// 2 for usage/config problems, 3 for numerical and capacity failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidArgument(_) => 2,
            _ => 3,
        }
    }
}
