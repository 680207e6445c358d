use std::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A tensor fed to a network does not match the layer it reaches.
    ShapeMismatch {
        layer: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    /// Invalid space/search/study configuration.
    Config(String),
    /// An architecture string could not be decoded against a space.
    Decode(String),
    /// Removing the operator would drop the edge below its candidate floor.
    PruneBelowFloor { edge: usize, floor: usize },
    /// Matrix handed to the symmetric eigen-solver is not symmetric.
    NotSymmetric { max_asymmetry: f64 },
    /// Paired slices of different lengths.
    LengthMismatch { left: usize, right: usize },
    /// Not enough data to compute the requested statistic.
    Insufficient(String),
    /// Instance exceeds a documented size cap.
    TooLarge(String),
    /// A computation produced NaN/Inf from finite inputs.
    NonFinite(String),
    /// File I/O or parse failure, with context.
    Io(String),
    /// An internal invariant was violated; indicates a bug, not bad input.
    Internal(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch {
                layer,
                expected,
                got,
            } => write!(
                f,
                "shape mismatch at layer `{layer}`: expected {expected:?}, got {got:?}"
            ),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Decode(msg) => write!(f, "cannot decode architecture: {msg}"),
            Error::PruneBelowFloor { edge, floor } => write!(
                f,
                "pruning edge e{edge} would drop it below its floor of {floor} operator(s)"
            ),
            Error::NotSymmetric { max_asymmetry } => write!(
                f,
                "matrix is not symmetric (max |a_ij - a_ji| = {max_asymmetry:e})"
            ),
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::Insufficient(msg) => write!(f, "insufficient data: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite values: {msg}"),
            Error::TooLarge(msg) => write!(f, "instance too large: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
            Error::Internal(msg) => write!(f, "internal invariant violated: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
