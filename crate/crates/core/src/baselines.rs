//! Reference selectors: heaviest-edges-first and greedy D-optimal design.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{count_components, SparseLaplacian, SparsificationProblem};
use crate::rounding::{top_k, BinarySelection};

/// The `k` candidates of largest weight, ties to the lowest index.
pub fn naive_topk(problem: &SparsificationProblem, k: usize) -> Result<BinarySelection> {
    let m = problem.candidate_count();
    if k > m {
        return Err(Error::BudgetTooLarge { budget: k, m });
    }
    let weights: Vec<f64> = problem.candidate_edges().iter().map(|e| e.weight).collect();
    Ok(top_k(&weights, k))
}

/// Log-determinant of the Laplacian with row and column `anchor` removed,
/// i.e. the log of the weighted spanning-tree count. `-inf` when the graph
/// is disconnected.
pub fn reduced_log_det(lap: &SparseLaplacian, anchor: usize) -> f64 {
    let n = lap.dimension();
    assert!(anchor < n, "anchor {anchor} out of range");
    if n == 1 {
        return 0.0;
    }
    let dense = lap.to_dense().remove_row(anchor).remove_column(anchor);
    match dense.cholesky() {
        Some(c) => 2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

#[derive(Debug, Clone)]
pub struct GreedyOutcome {
    pub selection: BinarySelection,
    /// Candidate indices in the order they were added.
    pub order: Vec<usize>,
    /// Log-determinant increase contributed by each added edge.
    pub gains: Vec<f64>,
    /// Reduced log-determinant of the fixed graph.
    pub base_log_det: f64,
    pub log_det: f64,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    gain: f64,
    index: usize,
    round: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // max-heap: larger gain first, then lower index
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Greedy edge selection maximizing the reduced Laplacian log-determinant.
///
/// The inverse of the reduced Laplacian (anchored at node 0) is held densely
/// and updated by Sherman-Morrison after each pick. Adding edge `{u, v}` with
/// weight `w` raises the log-determinant by `log(1 + w·R_uv)`, where `R_uv`
/// is the current effective resistance; since `R_uv` only shrinks as edges are
/// added, stale gains are valid upper bounds and are re-evaluated lazily.
pub fn greedy_esp(problem: &SparsificationProblem, k: usize) -> Result<GreedyOutcome> {
    let m = problem.candidate_count();
    if k > m {
        return Err(Error::BudgetTooLarge { budget: k, m });
    }
    let n = problem.node_count();
    let components = count_components(problem.fixed_edges(), n);
    if components > 1 {
        return Err(Error::DisconnectedBaseGraph { components });
    }

    let reduced = problem
        .fixed_laplacian()
        .to_dense()
        .remove_row(0)
        .remove_column(0);
    let chol = reduced
        .cholesky()
        .ok_or(Error::DisconnectedBaseGraph { components })?;
    let base_log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let mut inverse = chol.inverse();

    let edges = problem.candidate_edges();
    let resistance = |p: &DMatrix<f64>, u: usize, v: usize| -> f64 {
        // node 0 is grounded and has no row in the reduced system
        let pick = |a: usize, b: usize| {
            if a == 0 || b == 0 {
                0.0
            } else {
                p[(a - 1, b - 1)]
            }
        };
        (pick(u, u) + pick(v, v) - 2.0 * pick(u, v)).max(0.0)
    };
    let gain_of = |p: &DMatrix<f64>, idx: usize| {
        let e = &edges[idx];
        (e.weight * resistance(p, e.u, e.v)).ln_1p()
    };

    let mut heap: BinaryHeap<Entry> = (0..m)
        .map(|index| Entry {
            gain: gain_of(&inverse, index),
            index,
            round: 0,
        })
        .collect();

    let mut order = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    let mut column = vec![0.0; n.saturating_sub(1)];
    while order.len() < k {
        let round = order.len();
        let top = heap.pop().expect("heap holds every unselected candidate");
        if top.round != round {
            heap.push(Entry {
                gain: gain_of(&inverse, top.index),
                index: top.index,
                round,
            });
            continue;
        }
        let e = &edges[top.index];
        order.push(top.index);
        gains.push(top.gain);

        // P a for a = e_u − e_v in reduced coordinates
        for (r, c) in column.iter_mut().enumerate() {
            let at = |node: usize| if node == 0 { 0.0 } else { inverse[(r, node - 1)] };
            *c = at(e.u) - at(e.v);
        }
        let denom = 1.0 + e.weight * resistance(&inverse, e.u, e.v);
        let scale = e.weight / denom;
        let dim = column.len();
        for j in 0..dim {
            let cj = column[j] * scale;
            if cj == 0.0 {
                continue;
            }
            for i in 0..dim {
                inverse[(i, j)] -= column[i] * cj;
            }
        }
    }

    let log_det = base_log_det + gains.iter().sum::<f64>();
    Ok(GreedyOutcome {
        selection: BinarySelection::from_indices(m, order.iter().copied()),
        order,
        gains,
        base_log_det,
        log_det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_laplacian, WeightedEdge};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(u: usize, v: usize, w: f64) -> WeightedEdge {
        WeightedEdge::new(u, v, w).unwrap()
    }

    fn problem(weights: &[f64], k: usize) -> SparsificationProblem {
        let n = weights.len() + 3;
        let fixed = (1..n).map(|i| e(i - 1, i, 1.0)).collect();
        let cands = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| e(i, i + 2, w))
            .collect();
        SparsificationProblem::new(n, fixed, cands, k).unwrap()
    }

    #[test]
    fn naive_examples() {
        assert_eq!(naive_topk(&problem(&[5.0, 1.0, 3.0], 1), 1).unwrap().bits(), &[true, false, false]);
        assert_eq!(naive_topk(&problem(&[2.0, 2.0, 2.0], 2), 2).unwrap().bits(), &[true, true, false]);
        assert!(naive_topk(&problem(&[2.0], 0), 2).is_err());
    }

    #[test]
    fn naive_ignores_topology() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n = 13;
            let weights: Vec<f64> = (0..10).map(|_| rng.gen_range(0.1..10.0)).collect();
            let p = problem(&weights, 4);
            // relabel nodes by a random permutation
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let relabel = |es: &[WeightedEdge]| es.iter().map(|x| e(perm[x.u], perm[x.v], x.weight)).collect();
            let q = SparsificationProblem::new(n, relabel(p.fixed_edges()), relabel(p.candidate_edges()), 4).unwrap();
            assert_eq!(naive_topk(&p, 4).unwrap(), naive_topk(&q, 4).unwrap());

            let mut sorted = weights.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let picked: Vec<f64> = naive_topk(&p, 4).unwrap().indices().map(|i| weights[i]).collect();
            assert!(picked.iter().all(|w| *w >= sorted[3]));
        }
    }

    #[test]
    fn matrix_tree_is_anchor_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let n = 7;
            let mut edges: Vec<_> = (1..n).map(|i| e(i - 1, i, rng.gen_range(0.5..3.0))).collect();
            for _ in 0..6 {
                let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
                if u != v {
                    edges.push(e(u, v, rng.gen_range(0.5..3.0)));
                }
            }
            let lap = build_laplacian(&edges, n).unwrap();
            let a = reduced_log_det(&lap, 0);
            let b = reduced_log_det(&lap, 4);
            assert!((a - b).abs() < 1e-10);
        }
        // unit-weight triangle has three spanning trees
        let tri = build_laplacian(&[e(0, 1, 1.0), e(1, 2, 1.0), e(0, 2, 1.0)], 3).unwrap();
        assert!((reduced_log_det(&tri, 1) - 3f64.ln()).abs() < 1e-12);
        let split = build_laplacian(&[e(0, 1, 1.0)], 3).unwrap();
        assert_eq!(reduced_log_det(&split, 0), f64::NEG_INFINITY);
    }

    #[test]
    fn single_pick_maximizes_weighted_resistance() {
        // chain 0-1-2-3-4-5: R(0,5) = 5, R(1,3) = 2
        let fixed = (1..6).map(|i| e(i - 1, i, 1.0)).collect();
        let p = SparsificationProblem::new(6, fixed, vec![e(1, 3, 2.0), e(0, 5, 1.0)], 1).unwrap();
        let out = greedy_esp(&p, 1).unwrap();
        assert_eq!(out.order, vec![1]);
        assert!((out.gains[0] - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn full_budget_reaches_full_log_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let weights: Vec<f64> = (0..9).map(|_| rng.gen_range(0.1..10.0)).collect();
        let p = problem(&weights, 9);
        let out = greedy_esp(&p, 9).unwrap();
        assert_eq!(out.selection, BinarySelection::all(9));
        let full = p.laplacian_of_selection(&[true; 9]).unwrap();
        assert!((out.log_det - reduced_log_det(&full, 0)).abs() < 1e-9);
    }

    #[test]
    fn gains_match_direct_recomputation_and_shrink() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let n = 8;
            let fixed: Vec<_> = (1..n).map(|i| e(i - 1, i, rng.gen_range(0.5..2.0))).collect();
            let mut cands = Vec::new();
            for u in 0..n {
                for v in u + 2..n {
                    if rng.gen_bool(0.5) {
                        cands.push(e(u, v, rng.gen_range(0.1..10.0)));
                    }
                }
            }
            let m = cands.len();
            let k = m / 2;
            let p = SparsificationProblem::new(n, fixed, cands, k).unwrap();
            let out = greedy_esp(&p, k).unwrap();

            let mut chosen = vec![false; m];
            let mut previous: Vec<f64> = vec![f64::INFINITY; m];
            for (&idx, &gain) in out.order.iter().zip(&out.gains) {
                let base = reduced_log_det(&p.laplacian_of_selection(&chosen).unwrap(), 0);
                let direct: Vec<f64> = (0..m)
                    .map(|j| {
                        let mut with = chosen.clone();
                        with[j] = true;
                        reduced_log_det(&p.laplacian_of_selection(&with).unwrap(), 0) - base
                    })
                    .collect();
                assert!((direct[idx] - gain).abs() < 1e-9);
                for j in (0..m).filter(|&j| !chosen[j]) {
                    assert!(direct[idx] >= direct[j] - 1e-9, "greedy did not pick the best gain");
                    assert!(direct[j] <= previous[j] + 1e-9, "gain grew for candidate {j}");
                    previous[j] = direct[j];
                }
                chosen[idx] = true;
            }
        }
    }

    #[test]
    fn rejects_disconnected_base() {
        let p = SparsificationProblem::new(4, vec![e(0, 1, 1.0)], vec![e(1, 2, 1.0), e(2, 3, 1.0)], 1).unwrap();
        assert!(matches!(greedy_esp(&p, 1), Err(Error::DisconnectedBaseGraph { components: 3 })));
    }
}
