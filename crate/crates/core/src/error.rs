use crate::ncpoly::{Alphabet, Letter};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: Alphabet, right: Alphabet },

    #[error("letter {letter:?} is not in alphabet {alphabet}")]
    ForeignLetter { letter: Letter, alphabet: Alphabet },

    #[error("cannot parse letter {0:?}")]
    BadLetter(alloc::string::String),

    #[error("{operation} is not supported for {alphabet}: {reason}")]
    Unsupported {
        operation: &'static str,
        alphabet: Alphabet,
        reason: &'static str,
    },

    #[error("operation requires a non-zero element")]
    ZeroElement,

    #[error("non-finite coefficient")]
    NonFinite,

    #[error("word of degree {degree} is beyond the truncation degree {max_degree}")]
    BeyondTruncation { degree: usize, max_degree: usize },

    #[error("functional is not normalized: value at 1 is {0}")]
    NotNormalized(Scalar),

    #[error("functional is not centralized: value at {letter} is {value}")]
    NotCentralized { letter: Letter, value: Scalar },

    #[error("generator must vanish at 1, found {0}")]
    NonZeroAtUnit(Scalar),

    #[error("{what} is not hermitian (defect {defect:e})")]
    NotHermitian { what: &'static str, defect: f64 },

    #[error("{what} is not unitary (defect {defect:e})")]
    NotUnitary { what: &'static str, defect: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("time {t} is not a grid point of a grid with step {dt}")]
    OffGrid { t: f64, dt: f64 },

    #[error("particle cutoff {cutoff} is too small, need at least {needed}")]
    CutoffTooSmall { cutoff: usize, needed: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
