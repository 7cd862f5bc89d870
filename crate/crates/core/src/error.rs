use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("lattice requires b >= 2 and s >= 2, got b={b}, s={s}")]
    InvalidLattice { b: usize, s: usize },
    #[error("generation index must be >= 1")]
    GenerationZero,
    #[error("path depths differ: {0} vs {1}")]
    DepthMismatch(u32, u32),
    #[error("{what} needs {needed:.3e} units, budget is {budget:.3e}")]
    BudgetExceeded { what: &'static str, needed: f64, budget: f64 },
    #[error("theta must lie in (0, 1), got {0}")]
    InvalidTheta(f64),
    #[error("tilt schedule has length {got}, expected {expected}")]
    ScheduleLength { got: usize, expected: usize },
    #[error("fractional moment u_{index} = {value} is not positive")]
    NonPositiveMoment { index: usize, value: f64 },
    #[error("operation requires {required}, model is {model}")]
    UnsupportedModel { required: &'static str, model: String },
    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),
    #[error("no sign change of the residual on [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
