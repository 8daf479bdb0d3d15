use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the chart domain")]
    Domain { point: Vec<f64> },

    #[error("regularization parameter {0} is not in (0, 1]")]
    Parameter(f64),

    #[error("denominator `{0}` has no nonvanishing certificate")]
    Uncertified(String),

    #[error("logarithm argument `{0}` is not certified positive")]
    NonPositiveLog(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("composition range escapes the target domain: {0}")]
    Composition(String),

    #[error("invalid epsilon grid: {0}")]
    Grid(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("mollifier construction failed: {0}")]
    Mollifier(String),

    #[error("unsupported distribution: {0}")]
    UnsupportedDistribution(String),

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("quadrature did not converge (value {value}, error estimate {error}, {intervals} intervals)")]
    Quadrature { value: f64, error: f64, intervals: usize },

    #[error("metric rejected: {0}")]
    Metric(String),

    #[error("singular matrix at eps={eps}, x={point:?}")]
    Singular { eps: f64, point: Vec<f64> },

    #[error("ODE integration failed: {0}")]
    Ode(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("generalized point leaves its support box at eps={eps}")]
    Support { eps: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
