//! Edge selection that maximizes the algebraic connectivity of a graph.
//!
//! Given a fixed edge set, a list of candidate edges and a budget `K`, the
//! solver relaxes the combinatorial selection to the box `[0, 1]^m` with
//! `sum x = K`, maximizes the (concave) Fiedler value there by Frank-Wolfe
//! with supergradients, and rounds back to exactly `K` edges. Every
//! iteration yields a dual upper bound, so the rounded answer carries a
//! per-instance suboptimality certificate.

pub mod baselines;
pub mod cholesky;
pub mod error;
pub mod fiedler;
pub mod g2o;
pub mod graph;
pub mod rounding;
pub mod solver;

pub use baselines::{greedy_esp, naive_topk, reduced_log_det, GreedyOutcome};
pub use error::{Error, Result};
pub use fiedler::{find_fiedler, find_fiedler_with, FiedlerOptions, FiedlerPair, FiedlerSolver};
pub use graph::{
    build_laplacian, count_components, edge_quadratic_form, ProblemWarning, SparseLaplacian,
    SparsificationProblem, WeightedEdge,
};
pub use rounding::{
    evaluate_selection, round_madow, round_madow_best_of, round_nearest, BinarySelection,
};
pub use solver::{
    dual_bound, frank_wolfe, frank_wolfe_with, mac, solve_direction, supergradient,
    FractionalSelection, FrankWolfeOutput, Initialization, IterationRecord, MacOptions, Rounding,
    SolveResult,
};
