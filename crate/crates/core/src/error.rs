use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid sample size {got}: {reason}")]
    InvalidSampleSize { got: usize, reason: &'static str },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("regressor path overflowed at t = {t}")]
    OverflowDetected { t: usize },
    #[error("regime too small at gamma = {gamma}: {lower} below, {upper} above, need {needed}")]
    EmptyRegime {
        gamma: f64,
        lower: usize,
        upper: usize,
        needed: usize,
    },
    #[error("design matrix is rank deficient (reciprocal condition {rcond:e})")]
    RankDeficient { rcond: f64 },
    #[error("threshold variable is degenerate: {0}")]
    DegenerateThresholdVariable(String),
    #[error("optimizer hit {iterations} iterations without converging")]
    MaxIterationsExceeded { iterations: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("regressor path carries no exogenous draws")]
    MissingExogenousDraws,
    #[error("instrument cross-moment matrix is near singular (reciprocal condition {rcond:e})")]
    NearSingularInstrumentGram { rcond: f64 },
    #[error("integrated limit Gram matrix is singular")]
    SingularLimitGram,
    #[error("argmax of the two-sided process hit the truncation bound {bound}")]
    ArgmaxAtBoundary { bound: f64 },
    #[error("missing critical values: {0}")]
    MissingCriticalValues(String),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("cannot parse value at data row {row}, column `{col}`: {reason}")]
    ParseError {
        row: usize,
        col: String,
        reason: String,
    },
    #[error("too few usable rows: {got} (need at least {needed})")]
    TooFewRows { got: usize, needed: usize },
    #[error("cell aborted: {0}")]
    CellAborted(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
}

/// Coarse failure class, mapped onto CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Numerical,
    MissingCriticalValues,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Data => 3,
            Category::Numerical => 4,
            Category::MissingCriticalValues => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Data => "data",
            Category::Numerical => "numerical",
            Category::MissingCriticalValues => "missing-critical-values",
        }
    }
}

impl Error {
    pub fn category(&self) -> Category {
        use Error::*;
        match self {
            InvalidConfig(_)
            | Toml(_)
            | InvalidSampleSize { .. }
            | DimensionMismatch(_)
            | NotPositiveDefinite => Category::Config,
            DegenerateThresholdVariable(_)
            | MissingColumn(_)
            | ParseError { .. }
            | TooFewRows { .. }
            | MissingExogenousDraws
            | Io(_)
            | Csv(_)
            | Json(_) => Category::Data,
            MissingCriticalValues(_) => Category::MissingCriticalValues,
            OverflowDetected { .. }
            | EmptyRegime { .. }
            | RankDeficient { .. }
            | MaxIterationsExceeded { .. }
            | NearSingularInstrumentGram { .. }
            | SingularLimitGram
            | ArgmaxAtBoundary { .. }
            | CellAborted(_) => Category::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
