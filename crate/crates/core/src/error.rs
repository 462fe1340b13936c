use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse grouping used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Argument,
    Model,
    Assumption,
    Io,
}

impl ErrorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Argument => "argument",
            ErrorClass::Model => "model",
            ErrorClass::Assumption => "assumption",
            ErrorClass::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {point:?} lies outside the parameter domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("samples {first} and {second} coincide")]
    DuplicateSample { first: usize, second: usize },

    #[error("sample index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("sampling density: {0}")]
    Density(String),

    #[error("map violates the full-rank condition: rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite state at t = {t}")]
    Divergence { t: f64 },

    #[error("no output samples fall inside the partition box")]
    EmptyDensity,

    #[error("{fraction} of output samples fall outside the partition box")]
    OutsideMass { fraction: f64 },

    #[error("no interior cell for supported bins {bins:?}")]
    Assumption { bins: Vec<usize> },

    #[error("event contains no sample point")]
    NoSample,

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::RankDeficient { .. }
            | Error::StepUnderflow { .. }
            | Error::Divergence { .. } => ErrorClass::Model,
            Error::Assumption { .. } | Error::NoSample => ErrorClass::Assumption,
            Error::Csv(_) | Error::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Argument,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
