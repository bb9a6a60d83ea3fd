use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid must have at least 2 rows and 2 columns, got {rows}x{cols}")]
    GridTooSmall { rows: usize, cols: usize },

    #[error("invalid network geometry: {0}")]
    Geometry(String),

    #[error("invalid ring index {index}: {reason}")]
    InvalidRing { index: usize, reason: String },

    #[error("requested {requested} parking locations but only {available} candidate streets exist")]
    TooManyLocations { requested: usize, available: usize },

    #[error("controller `{0}` requires a perimeter but none is defined")]
    MissingPerimeter(&'static str),

    #[error("no route from street {origin:?} to street {destination:?}")]
    Unreachable {
        origin: (usize, usize),
        destination: (usize, usize),
    },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("scenario document could not be parsed: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("scenario could not be serialized: {0}")]
    Serialize(#[from] toml::ser::Error),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("audit window of {window} steps exceeds the {horizon}-step run")]
    WindowTooLong { window: usize, horizon: usize },

    #[error("internal consistency fault at step {step}: {detail}")]
    Consistency { step: u64, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn scenario(msg: impl Into<String>) -> Self {
        Error::Scenario(msg.into())
    }
}
