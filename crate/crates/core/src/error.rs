use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{what} = {value} is out of range (max {max})")]
    OutOfRange { what: &'static str, value: u64, max: u64 },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("{op:?} expects {expected} operand(s), got {got}")]
    Arity {
        op: crate::crossbar::SenseOp,
        expected: usize,
        got: usize,
    },

    #[error("latch {0:?} read before it was loaded")]
    LatchUninitialized(crate::crossbar::Latch),

    #[error("division by zero")]
    DivideByZero,

    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("unknown event `{0}`")]
    UnknownEvent(String),

    #[error("missing baseline row: {0}")]
    MissingBaseline(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
