//! Frank-Wolfe on the Boolean relaxation, and the full MAC pipeline.
//!
//! `f(x) = λ₂(L(x))` is concave on `{x ∈ [0,1]^m : 1ᵀx = K}`. For a unit
//! Fiedler vector `q` of `L(x)`, `g_k = qᵀ L_k q` is a supergradient, and the
//! linear maximization over the feasible set is solved by putting ones on
//! the `K` largest entries of `g`. The same vertex `ŝ` gives the dual bound
//! `F_D(x) = f(x) + gᵀ(ŝ − x) ≥ max f`, hence a duality gap `F_D(x) − f(x)`.

use std::time::Instant;

use crate::baselines::naive_topk;
use crate::error::{Error, Result};
use crate::fiedler::{FiedlerOptions, FiedlerSolver};
use crate::graph::SparsificationProblem;
use crate::rounding::{evaluate_selection, round_madow_best_of, round_nearest, top_k, BinarySelection};

/// Below this estimated `λ₃ − λ₂`, an iteration is flagged as near-degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-6;

const SUM_TOLERANCE: f64 = 1e-9;

/// A point of the relaxed feasible set: entries in `[0, 1]` summing to `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalSelection(Vec<f64>);

impl FractionalSelection {
    pub fn new(x: Vec<f64>, budget: usize) -> Result<Self> {
        if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InfeasibleSelection(format!(
                "entry {bad} lies outside [0, 1]"
            )));
        }
        let total: f64 = x.iter().sum();
        if (total - budget as f64).abs() > SUM_TOLERANCE * (budget as f64).max(1.0) {
            return Err(Error::InfeasibleSelection(format!(
                "entries sum to {total}, expected {budget}"
            )));
        }
        Ok(Self(x))
    }

    /// `(K/m)·1`; the empty vector when `m = 0`.
    pub fn uniform(m: usize, budget: usize) -> Result<Self> {
        if budget > m {
            return Err(Error::BudgetTooLarge { budget, m });
        }
        if m == 0 {
            return Ok(Self(Vec::new()));
        }
        Ok(Self(vec![budget as f64 / m as f64; m]))
    }

    pub fn from_selection(selection: &BinarySelection) -> Self {
        Self(selection.to_f64())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of nonzero entries.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&v| v != 0.0).count()
    }
}

impl std::ops::Deref for FractionalSelection {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Per-iteration trace of a Frank-Wolfe run, evaluated at `x^(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// `λ₂` at `x^(t)`.
    pub f_value: f64,
    pub dual_bound: f64,
    /// `dual_bound − f_value`.
    pub gap: f64,
    /// `2 / (2 + t)`; not applied on the iteration that met the gap tolerance.
    pub step_size: f64,
    /// Seconds spent in the eigensolver for this iterate.
    pub fiedler_solve_time: f64,
    /// The estimated `λ₃ − λ₂` fell below [`DEGENERACY_THRESHOLD`].
    pub near_degenerate: bool,
}

/// `g_k = w_k (q[u_k] − q[v_k])²` for every candidate edge.
pub fn supergradient(problem: &SparsificationProblem, q2: &[f64]) -> Result<Vec<f64>> {
    if q2.len() != problem.node_count() {
        return Err(Error::DimensionMismatch {
            expected: problem.node_count(),
            actual: q2.len(),
        });
    }
    Ok(problem
        .candidate_edges()
        .iter()
        .map(|e| {
            let d = q2[e.u] - q2[e.v];
            e.weight * d * d
        })
        .collect())
}

/// Maximizer of `gᵀs` over `s ∈ [0,1]^m, 1ᵀs = K`: ones at the `K` largest
/// entries of `g`, ties to the lowest index.
pub fn solve_direction(g: &[f64], budget: usize) -> Result<BinarySelection> {
    if budget > g.len() {
        return Err(Error::BudgetTooLarge {
            budget,
            m: g.len(),
        });
    }
    Ok(top_k(g, budget))
}

/// `F_D(x) = f(x) + gᵀ(ŝ − x)`.
pub fn dual_bound(f_value: f64, g: &[f64], s_star: &BinarySelection, x: &[f64]) -> f64 {
    debug_assert_eq!(g.len(), x.len());
    debug_assert_eq!(g.len(), s_star.len());
    let ascent: f64 = g
        .iter()
        .zip(s_star.bits())
        .zip(x)
        .map(|((gk, &sk), xk)| gk * (if sk { 1.0 } else { 0.0 } - xk))
        .sum();
    f_value + ascent
}

struct Linearization {
    f_value: f64,
    q2: Vec<f64>,
    subspace: Vec<Vec<f64>>,
    direction: BinarySelection,
    dual_bound: f64,
    near_degenerate: bool,
    solve_time: f64,
}

fn linearize(
    problem: &SparsificationProblem,
    x: &[f64],
    warm: &[Vec<f64>],
    solver: &mut FiedlerSolver,
) -> Result<Linearization> {
    let lap = problem.laplacian_at(x)?;
    let started = Instant::now();
    let pair = solver.solve(&lap, warm)?;
    let solve_time = started.elapsed().as_secs_f64();
    let g = supergradient(problem, &pair.q2)?;
    let direction = solve_direction(&g, problem.budget())?;
    let dual = dual_bound(pair.lambda2, &g, &direction, x);
    Ok(Linearization {
        f_value: pair.lambda2,
        near_degenerate: pair
            .spectral_gap()
            .is_some_and(|gap| gap < DEGENERACY_THRESHOLD),
        q2: pair.q2,
        subspace: pair.subspace,
        direction,
        dual_bound: dual,
        solve_time,
    })
}

/// Result of [`frank_wolfe`].
#[derive(Debug, Clone)]
pub struct FrankWolfeOutput {
    pub x: FractionalSelection,
    pub history: Vec<IterationRecord>,
    /// The gap tolerance was met; `x` is the iterate of the last record.
    pub converged: bool,
    /// Fiedler vector at the last evaluated iterate.
    pub last_fiedler_vector: Option<Vec<f64>>,
    /// Ritz block at the last evaluated iterate, for warm-starting.
    pub last_subspace: Vec<Vec<f64>>,
}

/// Frank-Wolfe with step `2/(2+t)`, stopping after `max_iters` steps or once
/// the duality gap at the current iterate is at most `gap_tol`.
pub fn frank_wolfe(
    problem: &SparsificationProblem,
    x0: &FractionalSelection,
    max_iters: usize,
    gap_tol: f64,
) -> Result<FrankWolfeOutput> {
    frank_wolfe_with(problem, x0, max_iters, gap_tol, &FiedlerOptions::default())
}

pub fn frank_wolfe_with(
    problem: &SparsificationProblem,
    x0: &FractionalSelection,
    max_iters: usize,
    gap_tol: f64,
    fiedler: &FiedlerOptions,
) -> Result<FrankWolfeOutput> {
    let budget = problem.budget();
    let mut x = FractionalSelection::new(x0.to_vec(), budget)?;
    if x.len() != problem.candidate_count() {
        return Err(Error::DimensionMismatch {
            expected: problem.candidate_count(),
            actual: x.len(),
        });
    }
    let mut history = Vec::with_capacity(max_iters);
    let mut solver = FiedlerSolver::new(fiedler.clone());
    let mut warm: Vec<Vec<f64>> = Vec::new();
    let mut last_q2 = None;
    let mut converged = false;

    for t in 0..max_iters {
        let lin = linearize(problem, &x, &warm, &mut solver).map_err(|source| {
            Error::Iteration {
                iteration: t,
                source: Box::new(source),
            }
        })?;
        let step = 2.0 / (2.0 + t as f64);
        let gap = lin.dual_bound - lin.f_value;
        history.push(IterationRecord {
            iter: t,
            f_value: lin.f_value,
            dual_bound: lin.dual_bound,
            gap,
            step_size: step,
            fiedler_solve_time: lin.solve_time,
            near_degenerate: lin.near_degenerate,
        });
        log::debug!(
            "fw iter {t}: f = {:.10e}, F_D = {:.10e}, gap = {gap:.3e}",
            lin.f_value,
            lin.dual_bound
        );
        warm = lin.subspace;
        last_q2 = Some(lin.q2);
        if gap <= gap_tol {
            converged = true;
            break;
        }
        // (1 − α) x + α s keeps x^(1) = s^(0) exactly when α = 1
        for (xk, &sk) in x.0.iter_mut().zip(lin.direction.bits()) {
            let target = if sk { 1.0 } else { 0.0 };
            *xk = ((1.0 - step) * *xk + step * target).clamp(0.0, 1.0);
        }
    }

    Ok(FrankWolfeOutput {
        x,
        history,
        converged,
        last_fiedler_vector: last_q2,
        last_subspace: warm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    Nearest,
    Madow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initialization {
    /// The `K` heaviest candidates.
    Naive,
    /// `(K/m)·1`.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct MacOptions {
    pub rounding: Rounding,
    pub max_iters: usize,
    pub gap_tol: f64,
    pub seed: u64,
    pub init: Initialization,
    /// Number of Madow samples; the best is kept.
    pub madow_draws: usize,
    pub fiedler: FiedlerOptions,
}

impl Default for MacOptions {
    fn default() -> Self {
        Self {
            rounding: Rounding::Madow,
            max_iters: 20,
            gap_tol: 1e-8,
            seed: 0,
            init: Initialization::Naive,
            madow_draws: 1,
            fiedler: FiedlerOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub relaxed_x: FractionalSelection,
    pub rounded_x: BinarySelection,
    pub f_relaxed: f64,
    pub f_rounded: f64,
    /// Smallest dual bound seen over all evaluated iterates.
    pub best_dual_bound: f64,
    /// Dual bound at the returned relaxed iterate.
    pub final_dual_bound: f64,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    /// Wall-clock seconds for the whole solve, rounding included.
    pub total_time: f64,
}

impl SolveResult {
    /// Certified bound on `p* − f(rounded)`.
    pub fn suboptimality_bound(&self) -> f64 {
        self.best_dual_bound - self.f_rounded
    }

    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

/// Relax, solve by Frank-Wolfe, round.
pub fn mac(problem: &SparsificationProblem, opts: &MacOptions) -> Result<SolveResult> {
    let started = Instant::now();
    let m = problem.candidate_count();
    let budget = problem.budget();
    let x0 = match opts.init {
        Initialization::Naive => FractionalSelection::from_selection(&naive_topk(problem, budget)?),
        Initialization::Uniform => FractionalSelection::uniform(m, budget)?,
    };
    let fw = frank_wolfe_with(problem, &x0, opts.max_iters, opts.gap_tol, &opts.fiedler)?;

    let (f_relaxed, final_dual_bound) = match (fw.converged, fw.history.last()) {
        (true, Some(last)) => (last.f_value, last.dual_bound),
        _ => {
            let mut solver = FiedlerSolver::new(opts.fiedler.clone());
            let lin = linearize(problem, &fw.x, &fw.last_subspace, &mut solver)?;
            (lin.f_value, lin.dual_bound)
        }
    };
    let best_dual_bound = fw
        .history
        .iter()
        .map(|r| r.dual_bound)
        .fold(final_dual_bound, f64::min);

    let (rounded_x, f_rounded) = match opts.rounding {
        Rounding::Nearest => {
            let sel = round_nearest(&fw.x, budget);
            let value = evaluate_selection(problem, &sel, &opts.fiedler)?;
            (sel, value)
        }
        Rounding::Madow => {
            round_madow_best_of(problem, &fw.x, opts.seed, opts.madow_draws, &opts.fiedler)?
        }
    };
    debug_assert_eq!(rounded_x.count(), budget);

    Ok(SolveResult {
        relaxed_x: fw.x,
        rounded_x,
        f_relaxed,
        f_rounded,
        best_dual_bound,
        final_dual_bound,
        history: fw.history,
        converged: fw.converged,
        total_time: started.elapsed().as_secs_f64(),
    })
}
