use thiserror::Error;

/// Errors produced by graph construction and the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is disconnected")]
    Disconnected,

    #[error("vertex {0} has zero total conductance")]
    ZeroDegree(usize),

    #[error("vertex {vertex} out of range for a graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("{u}-{v} is not an edge")]
    NotAnEdge { u: usize, v: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what}: size {size} exceeds the limit {limit}")]
    SizeLimit {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("{method} failed to converge after {iterations} iterations")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
    },

    #[error("singular linear system")]
    Singular,

    #[error("empty feasible set: no vertex set has stationary mass <= {0}")]
    EmptyFeasibleSet(f64),

    #[error("time cap {0} exceeded before the threshold was reached")]
    TimeCap(u64),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("threshold too large: every middle point of island {0} is good")]
    ThresholdTooLarge(usize),

    #[error("vertex budget exceeded: {size} > {budget}")]
    Budget { size: usize, budget: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
