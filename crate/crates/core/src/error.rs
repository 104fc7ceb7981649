use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("patch size {patch} does not fit in a {height}x{width} image")]
    PatchTooLarge {
        patch: usize,
        height: usize,
        width: usize,
    },
    #[error("pixel ({row}, {col}) is not covered by any patch")]
    UncoveredPixel { row: usize, col: usize },
    #[error("ratio out of range: {0} (expected 0 < ratio <= 1)")]
    RatioOutOfRange(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("line-hop bands overlap: base rows {upper} and {lower} are not more than h={amplitude} rows apart")]
    BandOverlap {
        upper: usize,
        lower: usize,
        amplitude: usize,
    },
    #[error("empty sampling plan")]
    EmptyPlan,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("non-finite objective at epoch {epoch}, batch {batch}")]
    NonFiniteObjective { epoch: usize, batch: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures of the numerical pipeline rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::NonFiniteObjective { .. })
    }
}
