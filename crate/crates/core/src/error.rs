use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A design constraint (such as a mechanical lower bound) is violated.
    #[error("constraint violated: {what} (bound {bound}, got {value})")]
    Constraint { what: String, bound: f64, value: f64 },

    #[error("no feasible design: {0}")]
    NoFeasibleDesign(String),

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge: estimate {estimate:e} with error bound {bound:e}")]
    NonConvergence { estimate: f64, bound: f64 },

    /// A drive amplitude above the hard current cap was requested.
    #[error("safety cap exceeded: {0}")]
    Safety(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
