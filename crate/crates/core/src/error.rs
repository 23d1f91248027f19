use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size {n}: {reason}")]
    InvalidSize { n: usize, reason: &'static str },

    #[error("dimension mismatch: expected {expected} spins, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("capacity exceeded for {what}: n = {n} is above the cap of {cap}")]
    Capacity {
        what: &'static str,
        n: usize,
        cap: usize,
    },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("zero-diagonal convention requested but entry ({index}, {index}) is nonzero")]
    NonzeroDiagonal { index: usize },

    #[error("sign entries must be +1 or -1 (entry {index} is {value})")]
    InvalidSign { index: usize, value: i8 },

    #[error("{requested} cumulants requested but only {available} moments are available")]
    InsufficientMoments { requested: usize, available: usize },

    #[error("{what} is outside its domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("correlation tensor of order {order} is missing")]
    MissingTensor { order: usize },

    #[error("scaling fit needs at least 4 usable points, got {got}")]
    NotEnoughPoints { got: usize },

    #[error("invalid chain configuration: {0}")]
    InvalidChain(String),

    #[error("spin index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn capacity(what: &'static str, n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::Capacity { what, n, cap })
    } else {
        Ok(())
    }
}
