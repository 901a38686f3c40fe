use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while loading, scoring or selecting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: bad magic {found:02x?} (expected \"DIPE\")", path.display())]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("{}: unsupported format version {found} (expected {expected})", path.display())]
    UnsupportedVersion {
        path: PathBuf,
        found: u16,
        expected: u16,
    },

    #[error("{}: truncated at byte {offset}: expected {expected} bytes, found {found}", path.display())]
    Truncated {
        path: PathBuf,
        offset: u64,
        expected: u64,
        found: u64,
    },

    #[error("{}: {trailing} trailing bytes after payload at byte {offset}", path.display())]
    TrailingBytes {
        path: PathBuf,
        offset: u64,
        trailing: u64,
    },

    #[error("{}: value {value} at byte {offset} is outside [0, 1]", path.display())]
    ValueOutOfRange {
        path: PathBuf,
        offset: u64,
        value: f32,
    },

    #[error("invalid dimensions {classes}x{height}x{width}: {reason}")]
    InvalidDimensions {
        classes: usize,
        height: usize,
        width: usize,
        reason: &'static str,
    },

    #[error("probability {value} at index {index} is outside [0, 1]")]
    InvalidProbability { index: usize, value: f32 },

    #[error("rle token {index}: {reason}")]
    Rle { index: usize, reason: String },

    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },

    #[error("{}: {message}", path.display())]
    Json { path: PathBuf, message: String },

    #[error("manifest: duplicate model_id {0:?}")]
    DuplicateModel(String),

    #[error("manifest: duplicate slice id {0:?}")]
    DuplicateSlice(String),

    #[error("manifest: empty {0}")]
    EmptyManifest(&'static str),

    #[error("manifest: model {model:?} has no prediction for slice {slice:?} ({})", path.display())]
    MissingPrediction {
        model: String,
        slice: String,
        path: PathBuf,
    },

    #[error("dimension mismatch for {context}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        context: String,
        expected: (usize, usize, usize),
        found: (usize, usize, usize),
    },

    #[error("k out of range: k = {k}, expected 1..={n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("exhaustive search refused for n = {n} models (limit {limit}); use the dipe or topk strategy instead")]
    TooManyModels { n: usize, limit: usize },

    #[error("invalid threshold {0}: expected a value in (0, 1)")]
    InvalidThreshold(f64),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }
}
