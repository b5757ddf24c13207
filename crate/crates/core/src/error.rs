use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid axis: {0}")]
    InvalidAxis(String),

    #[error("grid has {expected} nodes but {got} values were supplied")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("value {value:e} at flat index {index} is negative beyond the jitter tolerance")]
    NegativeValue { index: usize, value: f64 },

    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("expected {expected} axes, got {got}")]
    InvalidArity { expected: &'static str, got: usize },

    #[error("axis {axis} out of range for a {ndim}-axis input")]
    AxisOutOfRange { axis: usize, ndim: usize },

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("axis {axis}: {detail}")]
    Incommensurate { axis: usize, detail: String },

    #[error("window {window:?} has probability {prob:e}, below the empty-window threshold")]
    ZeroProbabilityWindow { window: Vec<usize>, prob: f64 },

    #[error("grid misses an estimated {tail:e} of the probability mass")]
    TailMass { tail: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("axis sets {target:?} | {condition:?} do not partition {ndim} axes")]
    NotPartition {
        target: Vec<usize>,
        condition: Vec<usize>,
        ndim: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
