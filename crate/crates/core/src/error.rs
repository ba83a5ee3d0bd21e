use std::path::PathBuf;

use thiserror::Error;

use crate::gan::Checkpoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // --- configuration / validation ---
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("pitch range too small for pitch classes")]
    PitchRangeTooSmall,
    #[error("degenerate split")]
    DegenerateSplit,
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("shape mismatch")]
    ShapeMismatch,
    #[error("stale or mismatched activation cache")]
    StaleCache,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("duplicate candidate id {0}")]
    DuplicateCandidateId(u64),
    #[error("insufficient records: need {needed}, have {available}")]
    InsufficientRecords { needed: usize, available: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("no rows")]
    NoRows,
    #[error("output directory {0} is not empty (pass --force to overwrite)")]
    OutputExists(PathBuf),

    // --- data / format ---
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated dataset")]
    TruncatedDataset,
    #[error("truncated checkpoint")]
    TruncatedCheckpoint,
    #[error("trailing bytes after payload")]
    TrailingBytes,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-binary cell value {0}")]
    NonBinary(f64),
    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),
    #[error("malformed metadata: {0}")]
    Metadata(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // --- runtime ---
    #[error("scoring candidate {id} failed: {source}")]
    ScorerFailed {
        id: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("non-finite score for candidate {0}")]
    NonFiniteScore(u64),
    #[error("divergence")]
    Divergence,
    #[error("training diverged at iteration {iteration}")]
    TrainingDiverged {
        iteration: usize,
        last_good: Option<Box<Checkpoint>>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 configuration, 3 data/format, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidShape(_)
            | Error::PitchRangeTooSmall
            | Error::DegenerateSplit
            | Error::IndexOutOfRange(_)
            | Error::DimensionMismatch { .. }
            | Error::ShapeMismatch
            | Error::StaleCache
            | Error::Config(_)
            | Error::DuplicateCandidateId(_)
            | Error::InsufficientRecords { .. }
            | Error::EmptyInput(_)
            | Error::NoRows
            | Error::OutputExists(_) => 2,
            Error::BadMagic
            | Error::UnsupportedVersion(_)
            | Error::TruncatedDataset
            | Error::TruncatedCheckpoint
            | Error::TrailingBytes
            | Error::EmptyDataset
            | Error::NonBinary(_)
            | Error::ArchitectureMismatch(_)
            | Error::Metadata(_)
            | Error::Json(_)
            | Error::Io { .. } => 3,
            Error::ScorerFailed { source, .. } => source.exit_code(),
            Error::NonFiniteScore(_) | Error::Divergence | Error::TrainingDiverged { .. } => 4,
        }
    }
}
