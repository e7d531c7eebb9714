use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no template fits inside the scene bounds")]
    EmptyLibrary,
    #[error("unknown template id {0}")]
    UnknownId(u32),
    #[error("duplicate template id {0}")]
    DuplicateId(u32),
    #[error("invalid shape `{name}`: {reason}")]
    InvalidShape { name: String, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point projects to infinity (|w| = {0:e})")]
    PointAtInfinity(f64),
    #[error("camera has a singular 3x3 block")]
    SingularCamera,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no alpha entry exceeds the threshold {0}")]
    EmptyFeasibleSet(f64),
    #[error("target has no foreground but the estimate does")]
    ZeroForeground,
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
