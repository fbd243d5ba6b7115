use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdmmError {
    #[error("graph is not connected ({reached} of {total} agents reachable from agent 0)")]
    DisconnectedGraph { reached: usize, total: usize },
    #[error("invalid edge ({0}, {1}): {2}")]
    InvalidEdge(usize, usize, &'static str),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix spectrum is identically zero")]
    AllZeroSpectrum,
    #[error("inner solver failed to converge for agent {agent} at iteration {iteration} (residual {residual:e})")]
    SolverDivergence {
        agent: usize,
        iteration: usize,
        residual: f64,
    },
    #[error("cost is not strongly convex (v = {0:e})")]
    NotStronglyConvex(f64),
    #[error("no unreliable assignment with a reliable majority around every agent: {0}")]
    MajorityViolated(String),
    #[error("parameter out of domain: {0}")]
    DomainError(String),
    #[error("convergence conditions are infeasible: {0}")]
    ConditionInfeasible(String),
    #[error("trace is missing required data: {0}")]
    MissingFields(String),
    #[error("linear system is inconsistent: {0}")]
    InconsistentSystem(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("identity residual above tolerance at iteration {k} (primal form {primal:e}, optimality form {optimality:e})")]
    IdentityViolation { k: usize, primal: f64, optimality: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, AdmmError>;

impl From<std::io::Error> for AdmmError {
    fn from(e: std::io::Error) -> Self {
        AdmmError::Io(e.to_string())
    }
}

impl From<csv::Error> for AdmmError {
    fn from(e: csv::Error) -> Self {
        AdmmError::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for AdmmError {
    fn from(e: serde_json::Error) -> Self {
        AdmmError::Parse(e.to_string())
    }
}
