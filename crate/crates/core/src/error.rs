use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Cholesky failed even at the largest ridge; `index` is the leading minor
    /// whose pivot went non-positive.
    #[error(
        "singular training set: leading minor {index} not positive definite (ridge {ridge:e})"
    )]
    Singular { index: usize, ridge: f64 },

    #[error("layout mismatch: {0}")]
    Mismatch(String),

    #[error("geometry fingerprint mismatch: expected {expected}, found {found}")]
    Fingerprint { expected: String, found: String },

    #[error("container: {0}")]
    Container(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn container(msg: impl Into<String>) -> Self {
        Error::Container(msg.into())
    }
}
