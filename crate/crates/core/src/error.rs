use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("duplicate asset id `{0}`")]
    DuplicateAsset(String),

    #[error("panel too short: need at least {needed} rows, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("time ids must be strictly increasing (row {0})")]
    UnorderedTime(usize),

    #[error("matrix is not rectangular or labels do not match its shape: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("infeasible constraint set: {p} assets with floor {lower_bound} exceed the budget")]
    InfeasibleOmega { p: usize, lower_bound: f64 },

    #[error("variance term V - U^2 = {0:e} is not positive")]
    DegenerateVariance(f64),

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,

    #[error("mean vector is proportional to the ones vector (D = 0)")]
    DegenerateD,

    #[error("GARCH parameters are not covariance stationary (gamma1 + gamma2 = {0})")]
    NonStationary(f64),

    #[error("invalid generator config: {0}")]
    InvalidConfig(String),

    #[error("parametric resampling requires a fitted moment model")]
    MissingModel,

    #[error("bad block length {len} for panel of {n} rows")]
    BadBlockLen { len: usize, n: usize },

    #[error("paired differences have zero variance")]
    ZeroVariance,

    #[error("series is constant; autocorrelations are undefined")]
    ConstantSeries,

    #[error("insufficient history: need {needed} rows, have {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("benchmark column `{0}` not found")]
    MissingBenchmark(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("io: {0}")]
    Io(String),

    #[error("json: {0}")]
    Json(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
