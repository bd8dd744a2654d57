use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("degenerate patch: {0}")]
    DegeneratePatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("no correspondences within the maximum correspondence distance")]
    NoOverlap,

    #[error("no valid models in the database")]
    NoValidModels,

    #[error("unsupported library version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("corrupt library file: {0}")]
    CorruptLibrary(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("instance too large for exhaustive search: n = {0} (max 16)")]
    TooLarge(usize),

    #[error("no neighborhood of the scan could be canonicalized")]
    NothingToMatch,

    #[error("library has no exemplar priors")]
    NoExemplars,

    #[error("every candidate prior was rejected during alignment")]
    MatchRejected,

    #[error("cloud has no oriented points")]
    CannotOrient,

    #[error("no comparable regions between the two inputs")]
    NoComparableRegions,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
