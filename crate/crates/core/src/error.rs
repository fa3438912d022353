//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Result`]. Variants carry
//! enough context (shapes, names, indices) that a caller can report the
//! failure without re-deriving it.

use thiserror::Error;

/// Errors produced by the QoE-LSTM toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix/vector product was attempted with incompatible shapes.
    #[error("shape mismatch: {rows}x{cols} matrix applied to length-{len} vector")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },

    /// A vector had a different length than the consumer required.
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Row data passed to a matrix constructor was ragged or mis-sized.
    #[error("bad matrix data: {0}")]
    BadMatrixData(String),

    /// An input value that must be finite was NaN or infinite.
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    /// Training loss left the finite range; carries the failing position.
    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    /// A configuration value was outside its documented range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A normalization range collapsed to a point (hi == lo).
    #[error("degenerate normalization for {what}: lo {lo} == hi {hi}")]
    DegenerateNormalization { what: &'static str, lo: f64, hi: f64 },

    /// A trace was shorter than the training window it must fill.
    #[error("trace '{video_id}' has {len} seconds, shorter than timestep {timestep}")]
    TraceTooShort {
        video_id: String,
        len: usize,
        timestep: usize,
    },

    /// A correlation was requested on a zero-variance series.
    #[error("correlation undefined: {which} series is constant")]
    ConstantSeries { which: &'static str },

    /// Paired series had different lengths.
    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A split fraction was outside (0, 1).
    #[error("split fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),

    /// An outage threshold fraction was not positive.
    #[error("outage threshold fraction {0} must be positive")]
    InvalidThreshold(f64),

    /// A trace file or its metadata failed validation.
    #[error("bad trace {path}: {reason}")]
    BadTrace { path: String, reason: String },

    /// Corpus-level metadata disagreed between traces.
    #[error("inconsistent corpus: {0}")]
    InconsistentCorpus(String),

    /// A video id appeared twice in one corpus.
    #[error("duplicate video id '{0}' in corpus")]
    DuplicateVideoId(String),

    /// A split plan referenced a video id missing from the corpus.
    #[error("unknown video id '{0}' in split plan")]
    UnknownVideoId(String),

    /// A leave-p-out request did not match the corpus grouping.
    #[error("cannot form leave-{p}-out folds: {reason}")]
    BadLeaveOut { p: usize, reason: String },

    /// A model file declared a format this build does not read.
    #[error("unsupported model format version {found} (this build reads {supported})")]
    UnsupportedFormatVersion { found: u32, supported: u32 },

    /// Filesystem failure, with the path that triggered it.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// JSON (de)serialization failure, with the path that triggered it.
    #[error("json error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    /// CSV (de)serialization failure, with the path that triggered it.
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Short machine-readable tag for this error, used by the CLI's
    /// one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::BadMatrixData(_) => "bad_matrix_data",
            Error::NonFinite { .. } => "non_finite",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::InvalidConfig(_) => "invalid_config",
            Error::DegenerateNormalization { .. } => "degenerate_normalization",
            Error::TraceTooShort { .. } => "trace_too_short",
            Error::ConstantSeries { .. } => "constant_series",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::InvalidFraction(_) => "invalid_fraction",
            Error::InvalidThreshold(_) => "invalid_threshold",
            Error::BadTrace { .. } => "bad_trace",
            Error::InconsistentCorpus(_) => "inconsistent_corpus",
            Error::DuplicateVideoId(_) => "duplicate_video_id",
            Error::UnknownVideoId(_) => "unknown_video_id",
            Error::BadLeaveOut { .. } => "bad_leave_out",
            Error::UnsupportedFormatVersion { .. } => "unsupported_format_version",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Csv { .. } => "csv",
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
