use thiserror::Error;

use crate::feasibility::Certificate;
use crate::maxent::Divergence;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid chain specification: {0}")]
    InvalidSpec(String),

    #[error("{what} is reducible")]
    Reducible { what: &'static str },

    #[error("hidden state {state} has zero stationary weight (no visible state enters it)")]
    Degenerate { state: String },

    #[error("completion violates {}", failures.join("; "))]
    CompletionInvalid { failures: Vec<String> },

    #[error(
        "scaling iteration did not converge ({reason}, {iterations} sweeps, residual {residual:.3e}); \
         the support constraints look infeasible, run a feasibility check"
    )]
    InfeasibleOrDegenerate {
        reason: Divergence,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "constraints are feasible only with forced zeros on allowed edges \
         (smallest allowed entry at ({row}, {col})); no strictly positive product form exists"
    )]
    DegenerateSupport { row: usize, col: usize, iterations: usize },

    #[error("support constraints are infeasible")]
    Infeasible { certificate: Box<Certificate> },

    #[error("feasibility is numerically indeterminate: {0}")]
    Indeterminate(String),

    #[error("block {block}: {source}")]
    Block {
        block: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("simulation: {0}")]
    Simulation(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::InvalidSpec(msg.into())
    }

    /// Strips `Block` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Block { source, .. } => source.root(),
            other => other,
        }
    }
}
