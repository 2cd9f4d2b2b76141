use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Bad magic bytes or an unknown version.
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    /// The byte stream ended early or carries inconsistent lengths.
    #[error("corrupt input: {0}")]
    Corruption(String),

    /// Structurally invalid header or record (shape mismatch, bad JSON).
    #[error("format error: {0}")]
    Format(String),

    /// Values that violate a data invariant: non-finite reals, missing labels, single-class sets.
    #[error("data error: {0}")]
    Data(String),

    #[error("selection error: {0}")]
    Selection(String),

    /// A mathematical precondition failed, e.g. a DFT of an empty signal.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("metric error: {0}")]
    Metric(String),
}

impl Error {
    /// True for errors caused by how the tool was configured rather than by the data it read.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Selection(_))
    }

    /// Prefix the message with context such as a record index.
    pub fn context(self, ctx: impl std::fmt::Display) -> Error {
        match self {
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), format!("{ctx}: {e}"))),
            Error::UnsupportedFormat(m) => Error::UnsupportedFormat(format!("{ctx}: {m}")),
            Error::Corruption(m) => Error::Corruption(format!("{ctx}: {m}")),
            Error::Format(m) => Error::Format(format!("{ctx}: {m}")),
            Error::Data(m) => Error::Data(format!("{ctx}: {m}")),
            Error::Selection(m) => Error::Selection(format!("{ctx}: {m}")),
            Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::Shape(m) => Error::Shape(format!("{ctx}: {m}")),
            Error::Metric(m) => Error::Metric(format!("{ctx}: {m}")),
        }
    }
}
