use thiserror::Error;

/// Errors raised across the crate. Each variant knows which subsystem produced it so
/// command-line tools can tag messages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model at `{field}`: {msg}")]
    Model { field: String, msg: String },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("unknown label `{0}`")]
    Lookup(String),

    #[error("scope error: {0}")]
    Scope(String),

    #[error("path error: {0}")]
    Path(String),

    #[error("spectral error: {msg} (measured norm estimate {norm:.6})")]
    Spectral { msg: String, norm: f64 },

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("oracle scope exceeded: {0}")]
    OracleScope(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn model(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Model {
            field: field.into(),
            msg: msg.into(),
        }
    }

    /// Short tag naming the subsystem an error most likely came from.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Dimension(_) | Error::Model { .. } | Error::Json(_) => "model",
            Error::Parameter(_) => "params",
            Error::Lookup(_) => "sofic",
            Error::Scope(_) => "homdim",
            Error::Path(_) | Error::Spectral { .. } => "graphcoh",
            Error::Consistency(_) => "graphings",
            Error::OracleScope(_) => "covering",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
