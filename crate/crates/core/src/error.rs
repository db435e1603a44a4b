use std::path::PathBuf;

/// Errors produced by `osr-core`.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value at step {step}: {detail}")]
    NonFinite { step: usize, detail: String },

    #[error("divergence at step {step}: |theta| = {norm:.3e} exceeds limit {limit:.3e}")]
    Divergence { step: usize, norm: f64, limit: f64 },

    #[error("stale forward cache: {0}")]
    StaleCache(String),

    #[error("exact primal minimisation is not available for this objective")]
    NoExactArgmin,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
