use thiserror::Error;

/// Errors raised across the library. Optimizer non-convergence is not an
/// error; it is reported on the fit result.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spline specification: {0}")]
    InvalidSpline(String),

    #[error("time {t} outside the spline domain [0, {tau}]")]
    TimeOutOfDomain { t: f64, tau: f64 },

    #[error("spline coefficient {index} is negative ({value})")]
    NegativeCoefficient { index: usize, value: f64 },

    #[error("Poisson mean must be nonnegative, got {0}")]
    NegativeMean(f64),

    #[error("derivative in the mean requires a positive mean, got {0}")]
    NonPositiveMean(f64),

    #[error("invalid cut points: {0}")]
    InvalidCutPoints(String),

    #[error("cut-point interval is empty: lower {lo} >= upper {hi}")]
    EmptyInterval { lo: f64, hi: f64 },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("response {response} of subject {subject} outside 1..={levels}")]
    ResponseOutOfRange {
        subject: String,
        response: u32,
        levels: u32,
    },

    #[error("invalid parameter vector: {0}")]
    InvalidParams(String),

    #[error("objective is not finite at the starting point; check the data")]
    NonFiniteObjective,

    #[error("second-difference matrix is singular (condition number {condition:.3e})")]
    SingularCurvature { condition: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// `row` is the 1-based line number in the file.
    #[error("line {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("no grid cell produced a converged fit")]
    NoConvergedFit,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
