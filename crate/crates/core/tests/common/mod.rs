#![allow(dead_code)]

use mac_core::{SparsificationProblem, WeightedEdge};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ascending eigenvalues of a dense symmetric matrix.
pub fn dense_spectrum(a: DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `λ₂` of the problem's Laplacian at `x`, by dense eigendecomposition.
pub fn dense_lambda2(problem: &SparsificationProblem, x: &[f64]) -> f64 {
    dense_spectrum(problem.laplacian_at(x).unwrap().to_dense())[1]
}

/// Fixed path `0-1-…-(n-1)` with weights in [0.5, 2] and `m` random
/// non-path candidates with weights in [0.1, 10].
pub fn random_chain_problem(n: usize, m: usize, budget: usize, rng: &mut ChaCha8Rng) -> SparsificationProblem {
    let fixed: Vec<_> = (1..n)
        .map(|i| WeightedEdge::new(i - 1, i, rng.gen_range(0.5..2.0)).unwrap())
        .collect();
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 2..n).map(move |v| (u, v)))
        .collect();
    assert!(pairs.len() >= m, "not enough non-path pairs");
    pairs.shuffle(rng);
    pairs.truncate(m);
    let candidates = pairs
        .into_iter()
        .map(|(u, v)| WeightedEdge::new(u, v, rng.gen_range(0.1..10.0)).unwrap())
        .collect();
    SparsificationProblem::new(n, fixed, candidates, budget).unwrap()
}

/// Random feasible point of `{x ∈ [0,1]^m : Σx = k}`.
pub fn random_feasible(m: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
    // bisection on a shift t so that Σ clamp(x + t, 0, 1) = k
    let (mut lo, mut hi) = (-1.0, 1.0);
    for _ in 0..200 {
        let t = 0.5 * (lo + hi);
        let s: f64 = x.iter().map(|v| (v + t).clamp(0.0, 1.0)).sum();
        if s < k as f64 {
            lo = t;
        } else {
            hi = t;
        }
    }
    let t = 0.5 * (lo + hi);
    for v in x.iter_mut() {
        *v = (*v + t).clamp(0.0, 1.0);
    }
    let err = k as f64 - x.iter().sum::<f64>();
    if let Some(v) = x.iter_mut().find(|v| (**v + err) > 0.0 && (**v + err) < 1.0) {
        *v += err;
    }
    x
}

/// A pose-graph-like instance: a robot random-walks on a 15×15 grid; the
/// odometry chain is fixed and candidates are loop closures between
/// non-consecutive poses at Manhattan distance ≤ 1, subsampled to `m`.
pub fn grid_walk_problem(n: usize, m: usize, seed: u64) -> SparsificationProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs = [(1i64, 0i64), (0, 1), (-1, 0), (0, -1)];
    let mut pos = vec![(0i64, 0i64)];
    let mut heading = 0usize;
    while pos.len() < n {
        let r: f64 = rng.gen();
        if r < 0.2 {
            heading = (heading + 1) % 4;
        } else if r < 0.4 {
            heading = (heading + 3) % 4;
        }
        let (x, y) = *pos.last().unwrap();
        let (dx, dy) = dirs[heading];
        let next = ((x + dx).clamp(-7, 7), (y + dy).clamp(-7, 7));
        if next == (x, y) {
            heading = (heading + 2) % 4;
            continue;
        }
        pos.push(next);
    }
    let fixed: Vec<_> = (1..n)
        .map(|i| WeightedEdge::new(i - 1, i, rng.gen_range(0.5..2.0)).unwrap())
        .collect();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 2..n {
            if (pos[i].0 - pos[j].0).abs() + (pos[i].1 - pos[j].1).abs() <= 1 {
                pairs.push((i, j));
            }
        }
    }
    assert!(pairs.len() >= m, "walk produced only {} closures", pairs.len());
    pairs.shuffle(&mut rng);
    pairs.truncate(m);
    pairs.sort_unstable();
    let candidates = pairs
        .into_iter()
        .map(|(u, v)| WeightedEdge::new(u, v, rng.gen_range(0.1..10.0)).unwrap())
        .collect();
    SparsificationProblem::new(n, fixed, candidates, 0).unwrap()
}

pub const SE2_FIXTURE: &str = "\
VERTEX_SE2 0 0 0 0
VERTEX_SE2 1 1 0 0.1
VERTEX_SE2 2 1 1 1.5707963267948966
EDGE_SE2 0 1 1 0 0.1 500 0 0 500 0 2000
EDGE_SE2 1 2 0 1 1.4707963267948966 500 0 0 500 0 2000
EDGE_SE2 0 2 1 1 1.5707963267948966 100 1 2 100 3 750.5
";

pub const SE3_FIXTURE: &str = "\
VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1
VERTEX_SE3:QUAT 1 1 0 0 0 0 0.0499791692706783 0.9987502603949663
VERTEX_SE3:QUAT 2 1 1 0.5 0 0 0.7071067811865476 0.7071067811865476
EDGE_SE3:QUAT 0 1 1 0 0 0 0 0.0499791692706783 0.9987502603949663 100 0 0 0 0 0 100 0 0 0 0 100 0 0 0 400 0 0 400 0 400
EDGE_SE3:QUAT 1 2 0 1 0.5 0 0 0.6717 0.7408 100 0 0 0 0 0 100 0 0 0 0 100 0 0 0 400 0 0 400 0 400
EDGE_SE3:QUAT 0 2 1 1 0.5 0 0 0.7071067811865476 0.7071067811865476 50 0 0 0 0 0 50 0 0 0 0 50 0 0 0 300 1 2 600 3 900
";
