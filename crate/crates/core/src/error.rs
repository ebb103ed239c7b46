use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),

    #[error("no samples")]
    NoSamples,

    #[error("undefined similarity")]
    UndefinedSimilarity,

    #[error("empty node set: {0}")]
    EmptyNodeSet(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("missing or malformed header, expected `{expected}`")]
    MissingHeader { expected: &'static str },

    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("unknown video `{0}`")]
    UnknownVideo(String),

    #[error("unknown cell ({0}, {1})")]
    UnknownCell(i32, i32),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("rank-deficient design matrix")]
    RankDeficient,

    #[error("non-positive regressor {0}")]
    NonPositive(f64),

    #[error("need at least two days of requests, found {0}")]
    InsufficientDays(usize),

    #[error("unknown breakdown dimension `{0}`")]
    UnknownDimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
