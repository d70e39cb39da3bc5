use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("capability limit: {0}")]
    Capability(String),

    #[error("non-finite value produced at hop {hop}")]
    Numeric { hop: usize },

    #[error("degenerate degree {degree} at node {node}")]
    DegenerateDegree { node: usize, degree: f64 },

    #[error("convergence bound violated at node {node}, k={k}: empirical {empirical:e} > bound {bound:e}")]
    BoundViolation {
        node: usize,
        k: usize,
        empirical: f64,
        bound: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
