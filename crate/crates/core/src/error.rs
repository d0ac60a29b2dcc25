use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("edge ({u}, {v}) has invalid weight {weight}")]
    InvalidWeight { u: usize, v: usize, weight: f64 },

    #[error("edge ({u}, {v}) appears in both the fixed and the candidate edge lists")]
    OverlappingEdge { u: usize, v: usize },

    #[error("budget {budget} exceeds the number of candidate edges {m}")]
    BudgetTooLarge { budget: usize, m: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("infeasible selection: {0}")]
    InfeasibleSelection(String),

    #[error("graph needs at least 2 nodes for algebraic connectivity, got {0}")]
    TooFewNodes(usize),

    #[error("matrix is not positive definite (pivot {pivot} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (best residual {best_residual:e}, tolerance {tolerance:e})")]
    FiedlerNotConverged {
        iterations: usize,
        best_residual: f64,
        tolerance: f64,
    },

    #[error("Frank-Wolfe iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("base graph is disconnected ({components} components); seed the fixed edges with a spanning tree before running greedy selection")]
    DisconnectedBaseGraph { components: usize },

    #[error("budget fraction {0} is outside [0, 1]")]
    InvalidFraction(f64),

    #[error("g2o parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("g2o file mixes 2D and 3D records (line {line})")]
    MixedDimensions { line: usize },

    #[error("i/o error")]
    Io(#[from] std::io::Error),
}
