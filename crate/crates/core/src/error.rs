use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not square")]
    NotSquare,

    #[error("matrix is not a Z-matrix")]
    NotZMatrix,

    #[error("matrix dimension {dim} exceeds the exhaustive limit {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("waterfilling input: {0}")]
    InvalidWaterfill(&'static str),

    #[error("closed form needs a single subchannel, scenario has {0}")]
    NotSingleSubchannel(usize),

    #[error("certificate matrix is not a P-matrix: no equilibrium exists")]
    NotPMatrix,

    #[error("existence certificate does not hold")]
    ExistenceCertificateMissing,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn check_index(what: &'static str, index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, len })
    }
}
