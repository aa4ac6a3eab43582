use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The feasible set is provably empty.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The polytope has an unbounded direction.
    #[error("polytope is unbounded")]
    UnboundedPolytope,

    /// A size cap was hit (leaf budget, dimension cap, ...).
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    /// Instance too large for the vertex-enumeration dimension cap.
    #[error("capacity exceeded: {0}; lower the instance size")]
    Capacity(String),

    /// The conic solver failed to converge or returned an unusable status.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// Two internal routes disagreed; indicates a numerical inconsistency.
    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
