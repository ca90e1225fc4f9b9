use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("out of range: {0}")]
    Range(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("numerical failure in block {block}: {msg}")]
    Numerical { block: String, msg: String },
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures caused by non-finite arithmetic rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
