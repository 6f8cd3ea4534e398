use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("patch at ({row}, {col}) does not fit a {height}x{width} image")]
    PatchOutOfRange {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("search window holds {available} candidate patches, {required} required")]
    InsufficientCandidates { available: usize, required: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing pixel ({row}, {col}) is not covered by any patch group")]
    UncoveredPixel { row: usize, col: usize },

    #[error("singular normal equation: {0}")]
    Singular(String),

    #[error("malformed {what} at byte offset {offset}: {message}")]
    Format {
        what: &'static str,
        offset: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    ImageCodec(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
