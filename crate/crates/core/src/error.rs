use thiserror::Error;

/// Errors raised by the planning library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RdvError {
    /// A query fell outside the domain of a path or velocity profile.
    #[error("{what} = {value} is outside the domain [{min}, {max}]")]
    Domain {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// Invalid construction parameters (prior, basis, profile, solver settings).
    #[error("configuration error: {0}")]
    Config(String),

    /// A data sample was rejected.
    #[error("invalid data at index {index}: {reason}")]
    Data { index: usize, reason: String },

    /// A caller-supplied argument violated a precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// The optimizer hit its iteration cap without certifying a solution.
    #[error("solver did not converge after {iterations} iterations (max violation {violation:.3e}, stationarity {stationarity:.3e})")]
    NonConvergence {
        iterations: usize,
        violation: f64,
        stationarity: f64,
    },
}

pub type Result<T, E = RdvError> = std::result::Result<T, E>;
