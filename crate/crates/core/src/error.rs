use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad magic bytes: expected \"EMB1\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported EMB1 version {0}")]
    UnsupportedVersion(u32),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },

    #[error("{extra} unexpected trailing bytes after embedding data")]
    TrailingData { extra: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("cannot normalize a zero vector (norm {norm:e})")]
    ZeroVector { norm: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate proxy for class {class}: weighted sum has norm {norm:e}")]
    DegenerateProxy { class: usize, norm: f64 },

    #[error("empty population: AUROC and FPR95 need at least one ID and one OOD score")]
    EmptyPopulation,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("cannot realize ID:OOD ratio {ratio}: {reason}")]
    InsufficientSamples { ratio: f64, reason: String },

    #[error("I/O error on {path}")]
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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
