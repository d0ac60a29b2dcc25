//! Weighted undirected graphs and their Laplacians.
//!
//! The Laplacian of a graph with edge weights `w_e` has `L_ii = sum of w_e`
//! over edges incident to `i` and `L_ij = -w_ij`. Everything in this crate
//! works with the affine family
//!
//! ```text
//! L(x) = L_fixed + sum_k x_k * L_k
//! ```
//!
//! where `L_k` is the Laplacian of the `k`-th candidate edge alone.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An undirected edge `{u, v}` with a nonnegative weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

impl WeightedEdge {
    pub fn new(u: usize, v: usize, weight: f64) -> Result<Self> {
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidWeight { u, v, weight });
        }
        Ok(Self { u, v, weight })
    }

    /// Endpoints as an ordered pair, so `{u, v}` and `{v, u}` compare equal.
    pub fn key(&self) -> (usize, usize) {
        if self.u < self.v {
            (self.u, self.v)
        } else {
            (self.v, self.u)
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        for index in [self.u, self.v] {
            if index >= n {
                return Err(Error::NodeOutOfRange { index, n });
            }
        }
        if self.u == self.v {
            return Err(Error::SelfLoop(self.u));
        }
        if !self.weight.is_finite() || self.weight < 0.0 {
            return Err(Error::InvalidWeight {
                u: self.u,
                v: self.v,
                weight: self.weight,
            });
        }
        Ok(())
    }
}

/// `qᵀ L_e q = w (q_u - q_v)²` for the single-edge Laplacian `L_e`.
pub fn edge_quadratic_form(edge: &WeightedEdge, q: &[f64]) -> Result<f64> {
    edge.check(q.len())?;
    let d = q[edge.u] - q[edge.v];
    Ok(edge.weight * d * d)
}

/// Symmetric sparse Laplacian stored as a list of merged edges.
///
/// Duplicate node pairs are merged by summing weights. The diagonal is kept
/// alongside for factorizations; matrix-vector products are assembled from
/// the edge list so that `L·1` is exactly zero.
#[derive(Debug, Clone, Default)]
pub struct SparseLaplacian {
    n: usize,
    edges: Vec<WeightedEdge>,
    slots: HashMap<(usize, usize), usize>,
    diag: Vec<f64>,
}

impl SparseLaplacian {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            slots: HashMap::new(),
            diag: vec![0.0; n],
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Off-diagonal structure, one entry per distinct node pair.
    pub fn edges(&self) -> &[WeightedEdge] {
        &self.edges
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Adds `weight` times the Laplacian of edge `{u, v}`. Amortized O(1).
    pub fn add_edge(&mut self, u: usize, v: usize, weight: f64) -> Result<()> {
        let edge = WeightedEdge { u, v, weight };
        edge.check(self.n)?;
        self.add_unchecked(edge.key(), weight);
        Ok(())
    }

    fn add_unchecked(&mut self, key: (usize, usize), weight: f64) {
        match self.slots.get(&key) {
            Some(&slot) => self.edges[slot].weight += weight,
            None => {
                self.slots.insert(key, self.edges.len());
                self.edges.push(WeightedEdge {
                    u: key.0,
                    v: key.1,
                    weight,
                });
            }
        }
        self.diag[key.0] += weight;
        self.diag[key.1] += weight;
    }

    /// `y = L x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n, "matvec input length");
        assert_eq!(y.len(), self.n, "matvec output length");
        y.iter_mut().for_each(|v| *v = 0.0);
        for e in &self.edges {
            let flow = e.weight * (x[e.u] - x[e.v]);
            y[e.u] += flow;
            y[e.v] -= flow;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `xᵀ L x = sum_e w_e (x_u - x_v)²`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n, "quadratic form input length");
        self.edges
            .iter()
            .map(|e| {
                let d = x[e.u] - x[e.v];
                e.weight * d * d
            })
            .sum()
    }

    /// Infinity norm (max absolute row sum), equal to twice the largest degree.
    pub fn norm_inf(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |acc, &d| acc.max(2.0 * d))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.edges.iter_mut().for_each(|e| e.weight *= factor);
        out.diag.iter_mut().for_each(|d| *d *= factor);
        out
    }

    /// Per-node neighbor lists `(neighbor, merged weight)`, sorted by neighbor.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.u].push((e.v, e.weight));
            adj[e.v].push((e.u, e.weight));
        }
        adj.iter_mut().for_each(|row| row.sort_by_key(|&(j, _)| j));
        adj
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, &d) in self.diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        for e in &self.edges {
            m[(e.u, e.v)] -= e.weight;
            m[(e.v, e.u)] -= e.weight;
        }
        m
    }
}

/// Assembles the Laplacian of `edges` on `n` nodes.
pub fn build_laplacian(edges: &[WeightedEdge], n: usize) -> Result<SparseLaplacian> {
    let mut lap = SparseLaplacian::new(n);
    for e in edges {
        lap.add_edge(e.u, e.v, e.weight)?;
    }
    Ok(lap)
}

/// Number of connected components of the graph formed by positive-weight edges.
pub fn count_components(edges: &[WeightedEdge], n: usize) -> usize {
    let mut dsu = DisjointSets::new(n);
    edges
        .iter()
        .filter(|e| e.weight > 0.0)
        .for_each(|e| dsu.union(e.u, e.v));
    dsu.count()
}

pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
    sets: usize,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            sets: n,
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        self.sets -= 1;
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }

    pub(crate) fn count(&self) -> usize {
        self.sets
    }
}

/// Non-fatal findings from [`SparsificationProblem::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemWarning {
    /// Even selecting every candidate edge leaves the graph disconnected.
    FullGraphDisconnected { components: usize },
    /// The budget is too small for any selection to connect the fixed graph.
    BudgetBelowSpanningTree { required: usize, budget: usize },
}

/// Fixed edges, candidate edges and a budget `K` on how many candidates to keep.
#[derive(Debug, Clone)]
pub struct SparsificationProblem {
    n: usize,
    fixed: Vec<WeightedEdge>,
    candidates: Vec<WeightedEdge>,
    budget: usize,
    fixed_laplacian: SparseLaplacian,
}

impl SparsificationProblem {
    /// Duplicate pairs within a list are merged (weights summed, first
    /// occurrence keeps its position); a pair present in both lists is an error.
    pub fn new(
        n: usize,
        fixed: Vec<WeightedEdge>,
        candidates: Vec<WeightedEdge>,
        budget: usize,
    ) -> Result<Self> {
        let fixed = merge_duplicates(fixed, n)?;
        let candidates = merge_duplicates(candidates, n)?;
        let fixed_keys: std::collections::HashSet<_> = fixed.iter().map(|e| e.key()).collect();
        if let Some(e) = candidates.iter().find(|e| fixed_keys.contains(&e.key())) {
            let (u, v) = e.key();
            return Err(Error::OverlappingEdge { u, v });
        }
        if budget > candidates.len() {
            return Err(Error::BudgetTooLarge {
                budget,
                m: candidates.len(),
            });
        }
        let fixed_laplacian = build_laplacian(&fixed, n)?;
        Ok(Self {
            n,
            fixed,
            candidates,
            budget,
            fixed_laplacian,
        })
    }

    pub fn with_budget(&self, budget: usize) -> Result<Self> {
        if budget > self.candidates.len() {
            return Err(Error::BudgetTooLarge {
                budget,
                m: self.candidates.len(),
            });
        }
        Ok(Self {
            budget,
            ..self.clone()
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn fixed_edges(&self) -> &[WeightedEdge] {
        &self.fixed
    }

    pub fn candidate_edges(&self) -> &[WeightedEdge] {
        &self.candidates
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn fixed_laplacian(&self) -> &SparseLaplacian {
        &self.fixed_laplacian
    }

    /// `L(x) = L_fixed + sum_k x_k L_k`.
    ///
    /// Only length and nonnegativity are checked, so sums of feasible
    /// points may be passed.
    pub fn laplacian_at(&self, x: &[f64]) -> Result<SparseLaplacian> {
        if x.len() != self.candidates.len() {
            return Err(Error::DimensionMismatch {
                expected: self.candidates.len(),
                actual: x.len(),
            });
        }
        let mut lap = self.fixed_laplacian.clone();
        for (e, &xk) in self.candidates.iter().zip(x) {
            if !xk.is_finite() || xk < 0.0 {
                return Err(Error::InfeasibleSelection(format!(
                    "entry {xk} is not a nonnegative weight"
                )));
            }
            // zero-weight candidates still enter the sparsity pattern
            lap.add_unchecked(e.key(), xk * e.weight);
        }
        Ok(lap)
    }

    /// Laplacian of the fixed edges plus the candidates with `bits[k]` set.
    pub fn laplacian_of_selection(&self, bits: &[bool]) -> Result<SparseLaplacian> {
        if bits.len() != self.candidates.len() {
            return Err(Error::DimensionMismatch {
                expected: self.candidates.len(),
                actual: bits.len(),
            });
        }
        let mut lap = self.fixed_laplacian.clone();
        for (e, _) in self.candidates.iter().zip(bits).filter(|(_, &b)| b) {
            lap.add_unchecked(e.key(), e.weight);
        }
        Ok(lap)
    }

    /// Checks whether some feasible selection can contain a spanning tree.
    pub fn validate(&self) -> Vec<ProblemWarning> {
        let mut warnings = Vec::new();
        let all: Vec<WeightedEdge> = self
            .fixed
            .iter()
            .chain(&self.candidates)
            .copied()
            .collect();
        let full = count_components(&all, self.n);
        if full > 1 {
            warnings.push(ProblemWarning::FullGraphDisconnected { components: full });
        }
        // a spanning forest of the fixed graph has n - c edges; a tree needs n - 1
        let required = count_components(&self.fixed, self.n).saturating_sub(1);
        if self.budget < required {
            warnings.push(ProblemWarning::BudgetBelowSpanningTree {
                required,
                budget: self.budget,
            });
        }
        for w in &warnings {
            log::warn!("{w:?}");
        }
        warnings
    }
}

fn merge_duplicates(edges: Vec<WeightedEdge>, n: usize) -> Result<Vec<WeightedEdge>> {
    let mut slots: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.len());
    let mut merged: Vec<WeightedEdge> = Vec::with_capacity(edges.len());
    for e in edges {
        e.check(n)?;
        match slots.get(&e.key()) {
            Some(&slot) => merged[slot].weight += e.weight,
            None => {
                slots.insert(e.key(), merged.len());
                merged.push(e);
            }
        }
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn e(u: usize, v: usize, w: f64) -> WeightedEdge {
        WeightedEdge::new(u, v, w).unwrap()
    }

    fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn single_edge_laplacian() {
        let l = build_laplacian(&[e(0, 1, 2.0)], 2).unwrap().to_dense();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[2.0, -2.0, -2.0, 2.0]));
    }

    #[test]
    fn empty_edge_list_gives_zero_matrix() {
        let l = build_laplacian(&[], 3).unwrap().to_dense();
        assert_eq!(l, DMatrix::zeros(3, 3));
    }

    #[test]
    fn triangle_spectrum() {
        let l = build_laplacian(&[e(0, 1, 1.0), e(1, 2, 1.0), e(0, 2, 1.0)], 3).unwrap();
        let d = l.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d[(i, j)], if i == j { 2.0 } else { -1.0 });
            }
        }
        let ev = sorted_eigenvalues(d);
        for (got, want) in ev.iter().zip([0.0, 3.0, 3.0]) {
            assert!((got - want).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(WeightedEdge::new(1, 1, 1.0), Err(Error::SelfLoop(1))));
        assert!(matches!(
            WeightedEdge::new(0, 1, -1.0),
            Err(Error::InvalidWeight { .. })
        ));
        assert!(matches!(
            build_laplacian(&[e(0, 3, 1.0)], 3),
            Err(Error::NodeOutOfRange { index: 3, n: 3 })
        ));
        let neg = WeightedEdge {
            u: 0,
            v: 1,
            weight: -2.0,
        };
        assert!(build_laplacian(&[neg], 2).is_err());
    }

    #[test]
    fn duplicates_merge_and_zero_weights_are_inert() {
        let l = build_laplacian(&[e(0, 1, 1.0), e(1, 0, 2.5), e(1, 2, 0.0)], 3).unwrap();
        assert_eq!(l.edges().len(), 2);
        let d = l.to_dense();
        assert_eq!(d[(0, 1)], -3.5);
        assert_eq!(d[(2, 2)], 0.0);
    }

    #[test]
    fn rows_sum_to_zero_exactly() {
        let edges: Vec<_> = (0..30)
            .map(|k| (k % 12, (k * 5 + 1) % 12, 0.1 + k as f64 / 7.0))
            .filter(|(u, v, _)| u != v)
            .map(|(u, v, w)| e(u, v, w))
            .collect();
        let l = build_laplacian(&edges, 12).unwrap();
        assert!(l.matvec(&[1.0; 12]).iter().all(|&v| v == 0.0));
        let d = l.to_dense();
        assert_eq!(d, d.transpose());
    }

    #[test]
    fn quadratic_form_of_edge() {
        assert_eq!(edge_quadratic_form(&e(0, 1, 1.0), &[1.0; 4]).unwrap(), 0.0);
        assert_eq!(
            edge_quadratic_form(&e(0, 1, 3.0), &[1.0, 0.0, 0.0]).unwrap(),
            3.0
        );
        assert!(edge_quadratic_form(&e(0, 5, 3.0), &[1.0, 0.0]).is_err());
    }

    #[test]
    fn components() {
        assert_eq!(count_components(&[], 4), 4);
        let tree = [e(0, 1, 1.0), e(1, 2, 1.0), e(1, 3, 1.0), e(3, 4, 1.0)];
        assert_eq!(count_components(&tree, 5), 1);
        let two = [
            e(0, 1, 1.0),
            e(1, 2, 1.0),
            e(0, 2, 1.0),
            e(3, 4, 1.0),
            e(4, 5, 1.0),
            e(3, 5, 1.0),
        ];
        assert_eq!(count_components(&two, 6), 2);
        let ev = sorted_eigenvalues(build_laplacian(&two, 6).unwrap().to_dense());
        assert_eq!(ev.iter().filter(|v| v.abs() < 1e-10).count(), 2);
        // zero-weight edges do not connect
        assert_eq!(count_components(&[e(0, 1, 0.0)], 2), 2);
    }

    fn small_problem() -> SparsificationProblem {
        SparsificationProblem::new(
            4,
            vec![e(0, 1, 1.0), e(1, 2, 1.0), e(2, 3, 1.0)],
            vec![e(0, 2, 4.0), e(0, 3, 2.0), e(1, 3, 1.0)],
            1,
        )
        .unwrap()
    }

    #[test]
    fn laplacian_at_endpoints_and_linearity() {
        let p = small_problem();
        let at_zero = p.laplacian_at(&[0.0; 3]).unwrap().to_dense();
        assert_eq!(at_zero, p.fixed_laplacian().to_dense());

        let all: Vec<_> = p.fixed_edges().iter().chain(p.candidate_edges()).copied().collect();
        let full = build_laplacian(&all, 4).unwrap().to_dense();
        assert_eq!(p.laplacian_at(&[1.0; 3]).unwrap().to_dense(), full);

        let half = p.laplacian_at(&[0.5, 0.0, 0.0]).unwrap().to_dense() - &at_zero;
        let edge = build_laplacian(&[e(0, 2, 2.0)], 4).unwrap().to_dense();
        assert_eq!(half, edge);

        let x = [0.2, 0.7, 0.1];
        let y = [0.6, 0.3, 0.9];
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let lhs = p.laplacian_at(&xy).unwrap().to_dense();
        let rhs = p.laplacian_at(&x).unwrap().to_dense() + p.laplacian_at(&y).unwrap().to_dense()
            - &at_zero;
        assert!((lhs - rhs).abs().max() < 1e-14);

        assert!(matches!(
            p.laplacian_at(&[0.0; 2]),
            Err(Error::DimensionMismatch { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn problem_rejects_overlap_and_large_budget() {
        let overlap = SparsificationProblem::new(3, vec![e(0, 1, 1.0)], vec![e(1, 0, 1.0)], 0);
        assert!(matches!(overlap, Err(Error::OverlappingEdge { u: 0, v: 1 })));
        let budget = SparsificationProblem::new(3, vec![], vec![e(1, 0, 1.0)], 2);
        assert!(matches!(budget, Err(Error::BudgetTooLarge { budget: 2, m: 1 })));
    }

    #[test]
    fn validate_reports_spanning_tree_shortfall() {
        assert!(small_problem().validate().is_empty());
        let p = SparsificationProblem::new(
            4,
            vec![e(0, 1, 1.0)],
            vec![e(1, 2, 1.0), e(2, 3, 1.0), e(0, 3, 1.0)],
            1,
        )
        .unwrap();
        assert_eq!(
            p.validate(),
            vec![ProblemWarning::BudgetBelowSpanningTree {
                required: 2,
                budget: 1
            }]
        );
    }
}
