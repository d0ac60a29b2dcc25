//! Sparse Cholesky factorization of `L + shift·I` for a graph Laplacian.
//!
//! Ordering is plain minimum degree on the explicit elimination graph; the
//! numeric phase is the up-looking row-by-row algorithm driven by the
//! elimination tree.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::graph::SparseLaplacian;

const NONE: usize = usize::MAX;

/// Fill-reducing permutation plus the structure of the factor.
///
/// Depends only on the sparsity pattern, so it can be reused for every
/// Laplacian with the same off-diagonal structure.
#[derive(Debug, Clone)]
pub struct SymbolicFactor {
    pattern: Vec<(usize, usize)>,
    sym: Symbolic,
}

impl SymbolicFactor {
    pub fn analyze(lap: &SparseLaplacian) -> Self {
        let pattern: Vec<Vec<usize>> = lap
            .adjacency()
            .iter()
            .map(|r| r.iter().map(|&(j, _)| j).collect())
            .collect();
        Self {
            pattern: pattern_of(lap),
            sym: minimum_degree(&pattern),
        }
    }

    /// Whether `lap` has exactly the pattern this analysis was built for.
    pub fn matches(&self, lap: &SparseLaplacian) -> bool {
        self.sym.perm.len() == lap.dimension()
            && self.pattern.len() == lap.edges().len()
            && self
                .pattern
                .iter()
                .zip(lap.edges())
                .all(|(&k, e)| k == e.key())
    }
}

fn pattern_of(lap: &SparseLaplacian) -> Vec<(usize, usize)> {
    lap.edges().iter().map(|e| e.key()).collect()
}

#[derive(Debug, Clone)]
struct Symbolic {
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `inv[old] = new`
    inv: Vec<usize>,
    parent: Vec<usize>,
    colptr: Vec<usize>,
}

fn minimum_degree(adj: &[Vec<usize>]) -> Symbolic {
    let n = adj.len();
    // sorted neighbor lists of the current elimination graph
    let mut graph: Vec<Vec<usize>> = adj.to_vec();
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((graph[v].len(), v))).collect();

    let mut perm = Vec::with_capacity(n);
    let mut inv = vec![NONE; n];
    let mut reach: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut merged = Vec::new();

    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != graph[v].len() {
            continue;
        }
        eliminated[v] = true;
        inv[v] = perm.len();
        perm.push(v);
        let nbrs = std::mem::take(&mut graph[v]);
        for &a in &nbrs {
            // graph[a] <- (graph[a] ∪ nbrs) \ {a, v}
            merged.clear();
            let (old, mut i, mut j) = (&graph[a], 0, 0);
            while i < old.len() || j < nbrs.len() {
                let next = match (old.get(i), nbrs.get(j)) {
                    (Some(&x), Some(&y)) if x == y => {
                        i += 1;
                        j += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        i += 1;
                        x
                    }
                    (Some(&x), None) => {
                        i += 1;
                        x
                    }
                    (_, Some(&y)) => {
                        j += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if next != a && next != v {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut graph[a], &mut merged);
            heap.push(Reverse((graph[a].len(), a)));
        }
        reach[v] = nbrs;
    }

    // column j of the factor (new order) holds the diagonal plus the
    // neighbors of perm[j] at the time it was eliminated
    let mut parent = vec![NONE; n];
    let mut colptr = vec![0; n + 1];
    for j in 0..n {
        let old = perm[j];
        colptr[j + 1] = colptr[j] + 1 + reach[old].len();
        parent[j] = reach[old].iter().map(|&o| inv[o]).min().unwrap_or(NONE);
    }
    Symbolic {
        perm,
        inv,
        parent,
        colptr,
    }
}

/// Lower-triangular factor `P (L + shift·I) Pᵀ = F Fᵀ`.
#[derive(Debug, Clone)]
pub struct ShiftedCholesky {
    sym: Symbolic,
    rows: Vec<usize>,
    vals: Vec<f64>,
}

impl ShiftedCholesky {
    pub fn factor(lap: &SparseLaplacian, shift: f64) -> Result<Self> {
        Self::factor_with(lap, &SymbolicFactor::analyze(lap), shift)
    }

    /// Numeric factorization reusing a symbolic analysis of the same pattern.
    pub fn factor_with(lap: &SparseLaplacian, symbolic: &SymbolicFactor, shift: f64) -> Result<Self> {
        assert!(symbolic.matches(lap), "symbolic analysis built for a different pattern");
        let n = lap.dimension();
        let adjacency = lap.adjacency();
        let sym = symbolic.sym.clone();

        // upper triangle of the permuted matrix, by column
        let mut upper: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (old, row) in adjacency.iter().enumerate() {
            let k = sym.inv[old];
            for &(nbr, w) in row {
                let i = sym.inv[nbr];
                if i < k {
                    upper[k].push((i, -w));
                }
            }
        }
        upper.iter_mut().for_each(|c| c.sort_by_key(|&(i, _)| i));

        let nnz = sym.colptr[n];
        let mut rows = vec![0usize; nnz];
        let mut vals = vec![0.0f64; nnz];
        let mut next: Vec<usize> = sym.colptr[..n].to_vec();
        let mut work = vec![0.0f64; n];
        let mut mark = vec![NONE; n];
        let mut stack: Vec<usize> = Vec::with_capacity(n);
        let mut pattern_k: Vec<usize> = Vec::with_capacity(n);

        for k in 0..n {
            // row k of the factor: nodes reachable from A(0:k, k) in the etree
            pattern_k.clear();
            mark[k] = k;
            for &(i, a) in &upper[k] {
                work[i] = a;
                let mut node = i;
                stack.clear();
                while node != NONE && mark[node] != k {
                    stack.push(node);
                    mark[node] = k;
                    node = sym.parent[node];
                }
                while let Some(s) = stack.pop() {
                    pattern_k.push(s);
                }
            }
            // etree paths were pushed leaf-to-root per source; a topological
            // order is obtained by sorting since parent[j] > j
            pattern_k.sort_unstable();

            let mut d = lap.diagonal()[sym.perm[k]] + shift;
            for &i in &pattern_k {
                let start = sym.colptr[i];
                let lki = work[i] / vals[start];
                work[i] = 0.0;
                for p in start + 1..next[i] {
                    work[rows[p]] -= vals[p] * lki;
                }
                d -= lki * lki;
                rows[next[i]] = k;
                vals[next[i]] = lki;
                next[i] += 1;
            }
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::NotPositiveDefinite {
                    column: sym.perm[k],
                    pivot: d,
                });
            }
            rows[next[k]] = k;
            vals[next[k]] = d.sqrt();
            next[k] += 1;
        }

        Ok(Self { sym, rows, vals })
    }

    pub fn dimension(&self) -> usize {
        self.sym.perm.len()
    }

    /// Number of stored entries in the triangular factor.
    pub fn factor_nnz(&self) -> usize {
        self.sym.colptr[self.dimension()]
    }

    /// Solves `(L + shift·I) x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64], scratch: &mut Vec<f64>) {
        let n = self.dimension();
        assert_eq!(b.len(), n);
        scratch.clear();
        scratch.extend(self.sym.perm.iter().map(|&old| b[old]));
        let y = scratch;
        let cp = &self.sym.colptr;
        // forward: F y = Pb
        for j in 0..n {
            let start = cp[j];
            y[j] /= self.vals[start];
            let yj = y[j];
            for p in start + 1..cp[j + 1] {
                y[self.rows[p]] -= self.vals[p] * yj;
            }
        }
        // backward: Fᵀ z = y
        for j in (0..n).rev() {
            let start = cp[j];
            let mut acc = y[j];
            for p in start + 1..cp[j + 1] {
                acc -= self.vals[p] * y[self.rows[p]];
            }
            y[j] = acc / self.vals[start];
        }
        for (new, &old) in self.sym.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_laplacian, WeightedEdge};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_laplacian(n: usize, m: usize, seed: u64) -> SparseLaplacian {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges: Vec<WeightedEdge> = (1..n)
            .map(|i| WeightedEdge::new(i - 1, i, rng.gen_range(0.5..2.0)).unwrap())
            .collect();
        for _ in 0..m {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v {
                edges.push(WeightedEdge::new(u, v, rng.gen_range(0.1..10.0)).unwrap());
            }
        }
        build_laplacian(&edges, n).unwrap()
    }

    #[test]
    fn solves_against_dense_lu() {
        for seed in 0..10 {
            let lap = random_laplacian(40, 60, seed);
            let shift = 1e-3;
            let chol = ShiftedCholesky::factor(&lap, shift).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let b: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut x = b.clone();
            chol.solve_in_place(&mut x, &mut Vec::new());

            let a = lap.to_dense() + DMatrix::identity(40, 40) * shift;
            let want = a.clone().lu().solve(&DVector::from_vec(b.clone())).unwrap();
            let err = (DVector::from_vec(x) - &want).norm() / want.norm();
            assert!(err < 1e-9, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn path_has_no_fill() {
        let lap = random_laplacian(200, 0, 3);
        let chol = ShiftedCholesky::factor(&lap, 1.0).unwrap();
        assert_eq!(chol.factor_nnz(), 200 + 199);
    }

    #[test]
    fn isolated_nodes_and_empty_graph() {
        let lap = build_laplacian(&[], 5).unwrap();
        let chol = ShiftedCholesky::factor(&lap, 4.0).unwrap();
        let mut b = vec![4.0, 8.0, 12.0, 16.0, 20.0];
        chol.solve_in_place(&mut b, &mut Vec::new());
        assert_eq!(b, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn indefinite_shift_is_rejected() {
        let lap = random_laplacian(10, 5, 1);
        assert!(matches!(
            ShiftedCholesky::factor(&lap, -0.5),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
