use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point budget exceeded: {requested} points requested, budget is {budget}")]
    PointBudget { requested: usize, budget: usize },

    #[error("evaluation budget exceeded: {requested} evaluations requested, budget is {budget}")]
    EvaluationBudget { requested: u64, budget: u64 },

    #[error("scale {scale} outside the system range [{min}, {max}]")]
    ScaleOutOfRange { scale: i32, min: i32, max: i32 },

    #[error("empty sample set")]
    EmptySample,

    #[error("sequence of length {len} exceeds the limit of {limit}")]
    TooLong { len: usize, limit: usize },

    #[error("exponent {0} is below 1")]
    ExponentBelowOne(f64),

    #[error("unknown registry name: {0}")]
    UnknownName(String),

    #[error("incompatible space: {0}")]
    IncompatibleSpace(String),

    #[error("ball {index} is not contained in any cube at the top scale")]
    BallNotCovered { index: usize },

    #[error("point {point} is outside the cube")]
    PointOutsideCube { point: usize },

    #[error("cube id {0} is not part of the system")]
    UnknownCube(usize),

    #[error("degenerate construction: {0}")]
    Degenerate(String),

    #[error("serialization: {0}")]
    Serialization(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
