use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("capture table covers t <= {available}, but {required} interferers are needed")]
    TableCoverage { required: usize, available: usize },

    #[error("{samples} samples per entry is below the floor of {floor}")]
    TooFewSamples { samples: u64, floor: u64 },

    #[error("slot cap of {0} slots reached")]
    SlotCap(usize),

    #[error("no cached capture table at {0} and building is disabled")]
    CacheMiss(PathBuf),

    #[error("corrupt capture table cache {path}: {reason}")]
    CorruptCache { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
