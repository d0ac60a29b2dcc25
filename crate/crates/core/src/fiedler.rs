//! Algebraic connectivity and Fiedler vectors of sparse Laplacians.
//!
//! The eigensolver is block inverse (subspace) iteration on `L + σI`, with
//! every block kept orthogonal to the all-ones vector and a Rayleigh-Ritz
//! projection after each sweep. Restricted to `1⊥` the smallest eigenvalue
//! of `L` is `λ₂`, so the leading Ritz pair converges to a Fiedler pair. The
//! returned value is the Rayleigh quotient of the returned vector, which
//! never undershoots the true `λ₂`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cholesky::{ShiftedCholesky, SymbolicFactor};
use crate::error::{Error, Result};
use crate::graph::SparseLaplacian;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Shift relative to `‖L‖∞` for the inner factorization.
const RELATIVE_SHIFT: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct FiedlerOptions {
    /// Residual tolerance, relative to `max(1, ‖L‖∞)`.
    pub tol: f64,
    pub max_iters: usize,
    /// Subspace dimension; larger blocks converge faster on clustered spectra.
    pub block_size: usize,
    /// Seed for the random columns of the starting block.
    pub seed: u64,
}

impl Default for FiedlerOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            max_iters: 5000,
            block_size: 8,
            seed: 0x5eed,
        }
    }
}

/// Algebraic connectivity `λ₂` and a unit Fiedler vector `q₂ ⊥ 1`.
#[derive(Debug, Clone)]
pub struct FiedlerPair {
    pub lambda2: f64,
    pub q2: Vec<f64>,
    /// Ritz estimate of `λ₃`, when the subspace is large enough to carry one.
    pub next_eigenvalue: Option<f64>,
    /// `‖L q₂ − λ₂ q₂‖₂` at termination.
    pub residual: f64,
    pub iterations: usize,
    /// Final Ritz block (ascending), usable as a warm start for a nearby matrix.
    pub subspace: Vec<Vec<f64>>,
}

impl FiedlerPair {
    /// Estimated gap `λ₃ − λ₂`, if available.
    pub fn spectral_gap(&self) -> Option<f64> {
        self.next_eigenvalue.map(|l3| l3 - self.lambda2)
    }
}

/// Fiedler pair of `lap` to residual tolerance `tol` with default settings otherwise.
pub fn find_fiedler(
    lap: &SparseLaplacian,
    warm_start: Option<&[f64]>,
    tol: f64,
) -> Result<FiedlerPair> {
    find_fiedler_with(
        lap,
        warm_start,
        &FiedlerOptions {
            tol,
            ..FiedlerOptions::default()
        },
    )
}

pub fn find_fiedler_with(
    lap: &SparseLaplacian,
    warm_start: Option<&[f64]>,
    opts: &FiedlerOptions,
) -> Result<FiedlerPair> {
    let warm: Vec<Vec<f64>> = warm_start.map(|w| vec![w.to_vec()]).unwrap_or_default();
    FiedlerSolver::new(opts.clone()).solve(lap, &warm)
}

/// Eigensolver that keeps its symbolic factorization between calls on
/// Laplacians sharing one sparsity pattern (as all `L(x)` of a problem do).
#[derive(Debug, Clone)]
pub struct FiedlerSolver {
    opts: FiedlerOptions,
    symbolic: Option<SymbolicFactor>,
}

impl FiedlerSolver {
    pub fn new(opts: FiedlerOptions) -> Self {
        Self {
            opts,
            symbolic: None,
        }
    }

    pub fn options(&self) -> &FiedlerOptions {
        &self.opts
    }

    /// Computes the Fiedler pair, seeding the block with the columns of `warm`.
    pub fn solve(&mut self, lap: &SparseLaplacian, warm: &[Vec<f64>]) -> Result<FiedlerPair> {
        let opts = &self.opts;
        let n = lap.dimension();
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        let norm = lap.norm_inf();
        let threshold = opts.tol * norm.max(1.0);
        let block = opts.block_size.clamp(1, n - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

        let mut x: Vec<Vec<f64>> = if block == n - 1 {
            // the subspace is all of 1⊥: Rayleigh-Ritz is exact
            helmert_basis(n)
        } else {
            let mut cols: Vec<Vec<f64>> = warm
                .iter()
                .filter(|w| w.len() == n)
                .take(block)
                .cloned()
                .collect();
            while cols.len() < block {
                cols.push(random_vector(n, &mut rng));
            }
            orthonormalize(&mut cols, &mut rng);
            cols
        };

        let mut factor: Option<ShiftedCholesky> = None;
        let mut best_residual = f64::INFINITY;
        let mut scratch = Vec::with_capacity(n);

        for iteration in 0..=opts.max_iters {
            let ritz = rayleigh_ritz(lap, &x);
            best_residual = best_residual.min(ritz.residual);
            if ritz.residual <= threshold || block == n - 1 {
                let mut q = ritz.vectors[0].clone();
                project_out_ones(&mut q);
                normalize(&mut q);
                let lambda2 = lap.quadratic_form(&q);
                let lq = lap.matvec(&q);
                let residual = lq
                    .iter()
                    .zip(&q)
                    .map(|(a, b)| (a - lambda2 * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                return Ok(FiedlerPair {
                    lambda2,
                    q2: q,
                    next_eigenvalue: ritz.values.get(1).copied(),
                    residual,
                    iterations: iteration,
                    subspace: ritz.vectors,
                });
            }
            if iteration == opts.max_iters {
                break;
            }
            if factor.is_none() {
                if !self.symbolic.as_ref().is_some_and(|s| s.matches(lap)) {
                    self.symbolic = Some(SymbolicFactor::analyze(lap));
                }
                let symbolic = self.symbolic.as_ref().expect("analyzed above");
                let shift = RELATIVE_SHIFT * norm.max(f64::MIN_POSITIVE);
                factor = Some(ShiftedCholesky::factor_with(lap, symbolic, shift)?);
            }
            let chol = factor.as_ref().expect("factored above");
            x = ritz.vectors;
            for col in x.iter_mut() {
                project_out_ones(col);
                chol.solve_in_place(col, &mut scratch);
            }
            orthonormalize(&mut x, &mut rng);
        }

        Err(Error::FiedlerNotConverged {
            iterations: opts.max_iters,
            best_residual,
            tolerance: threshold,
        })
    }
}

struct Ritz {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residual: f64,
}

fn rayleigh_ritz(lap: &SparseLaplacian, x: &[Vec<f64>]) -> Ritz {
    let p = x.len();
    let n = lap.dimension();
    let lx: Vec<Vec<f64>> = x.iter().map(|c| lap.matvec(c)).collect();
    let mut h = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let v = dot(&x[i], &lx[j]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut values = Vec::with_capacity(p);
    let mut vectors = Vec::with_capacity(p);
    let mut residual = 0.0;
    for (rank, &k) in order.iter().enumerate() {
        let coeffs = eig.eigenvectors.column(k);
        let mut q = vec![0.0; n];
        let mut lq = vec![0.0; n];
        for j in 0..p {
            axpy(coeffs[j], &x[j], &mut q);
            axpy(coeffs[j], &lx[j], &mut lq);
        }
        let theta = eig.eigenvalues[k];
        if rank == 0 {
            residual = lq
                .iter()
                .zip(&q)
                .map(|(a, b)| (a - theta * b).powi(2))
                .sum::<f64>()
                .sqrt();
        }
        values.push(theta);
        vectors.push(q);
    }
    Ritz {
        values,
        vectors,
        residual,
    }
}

/// Orthonormal basis of the complement of the all-ones vector.
fn helmert_basis(n: usize) -> Vec<Vec<f64>> {
    (1..n)
        .map(|j| {
            let scale = 1.0 / ((j * (j + 1)) as f64).sqrt();
            let mut v = vec![0.0; n];
            v[..j].iter_mut().for_each(|e| *e = scale);
            v[j] = -(j as f64) * scale;
            v
        })
        .collect()
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Modified Gram-Schmidt (two passes) against `1` and the preceding columns.
/// Columns that collapse are replaced by fresh random vectors.
fn orthonormalize(cols: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    let n = cols.first().map_or(0, Vec::len);
    for j in 0..cols.len() {
        let mut attempts = 0;
        loop {
            let before = norm2(&cols[j]);
            for _ in 0..2 {
                project_out_ones(&mut cols[j]);
                let (done, rest) = cols.split_at_mut(j);
                let col = &mut rest[0];
                for prev in done.iter() {
                    let c = dot(prev, col);
                    axpy(-c, prev, col);
                }
            }
            let after = norm2(&cols[j]);
            if after > 1e-10 * before && after > 0.0 {
                cols[j].iter_mut().for_each(|v| *v /= after);
                break;
            }
            attempts += 1;
            assert!(attempts < 100, "cannot extend an orthonormal block");
            cols[j] = random_vector(n, rng);
        }
    }
}

pub(crate) fn project_out_ones(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|e| *e -= mean);
}

fn normalize(v: &mut [f64]) {
    let nrm = norm2(v);
    if nrm > 0.0 {
        v.iter_mut().for_each(|e| *e /= nrm);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}
