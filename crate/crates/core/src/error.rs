use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("{what} did not converge after {iterations} iterations (last iterate {last})")]
    NonConvergence { what: &'static str, iterations: usize, last: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty series: {0}")]
    EmptySeries(String),

    #[error("horizon of {horizon} rows needs more than {len} prices")]
    HorizonTooLong { horizon: usize, len: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("fit parameter {param} ran to its bound {bound}")]
    Boundary { param: &'static str, bound: f64 },

    #[error("calibration infeasible: {0}")]
    Infeasible(String),

    #[error("expectation is infinite: {0}")]
    InfiniteExpectation(String),

    #[error("grid [{grid_min}, {grid_max}] does not cover the support of the distribution")]
    SupportNotCovered { grid_min: f64, grid_max: f64 },

    #[error("convolution grid of {points} points exceeds the cap of {cap}")]
    GridOverflow { points: usize, cap: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures caused by the input data rather than the numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Parse { .. }
                | Error::EmptySeries(_)
                | Error::HorizonTooLong { .. }
                | Error::Degenerate(_)
        )
    }

    /// True for argument validation failures.
    pub fn is_usage_error(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::Domain(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
