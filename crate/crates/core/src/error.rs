use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("radial value {r_c} exceeds the polynomial at the bracket end r = {r_hi} (value {value})")]
    NoBracket { r_c: f64, r_hi: f64, value: f64 },

    #[error("radial polynomial is not increasing at r = {radius}")]
    NotMonotone { radius: f64 },

    #[error("radial inversion did not converge for r_c = {r_c}")]
    NoConvergence { r_c: f64 },

    #[error("invalid view transform: {0}")]
    InvalidTransform(String),

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("mask selects no pixels")]
    EmptyMask,

    #[error("image {height}x{width} is smaller than the {window}x{window} window")]
    TooSmall {
        height: usize,
        width: usize,
        window: usize,
    },

    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported map format version {0}")]
    BadVersion(u8),

    #[error("map kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: u8, found: u8 },

    #[error("bad map header: {0}")]
    BadHeader(String),

    #[error("map file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("manifest line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("no monotone parameter set found after {attempts} attempts")]
    RejectionExhausted { attempts: u32 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient source images: {0}")]
    InsufficientSources(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("sample {sample}: {source}")]
    Sample {
        sample: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    ImageCodec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_sample(self, sample: u64) -> Self {
        Error::Sample {
            sample,
            source: Box::new(self),
        }
    }

    /// True for failures caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } | Error::ImageCodec { .. } => true,
            Error::Sample { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
