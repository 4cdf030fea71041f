//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

use crate::context::PatchSpec;
use crate::dataset::ObjectId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing manifest at {0}")]
    MissingManifest(PathBuf),
    #[error("invalid manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("parse error at {path}:{line}: {message}")]
    LabelParse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate pair_key '{key}' in dataset '{dataset}'")]
    DuplicatePairKey { dataset: String, key: String },
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),
    #[error("unknown object id '{0}'")]
    UnknownObject(ObjectId),
    #[error("patch spec mismatch: {a} vs {b}")]
    PatchSpecMismatch { a: PatchSpec, b: PatchSpec },
    #[error("empty sample set")]
    EmptySampleSet,
    #[error("sample value {0} outside [0, 1]")]
    SampleOutOfRange(f64),
    #[error("empty pair list")]
    EmptyPairs,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("class tables incompatible: {0}")]
    ClassTableMismatch(String),
    #[error("dataset '{name}' failed validation with {count} violation(s); first: {first}")]
    InvalidDataset {
        name: String,
        count: usize,
        first: String,
    },
    #[error("pairing failed: {0}")]
    Pairing(String),
    #[error("impossible placement constraints: no object could be placed")]
    ImpossibleConstraints,
    #[error("report error: {0}")]
    Report(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
