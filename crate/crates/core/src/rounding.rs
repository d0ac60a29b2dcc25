//! Rounding fractional selections back to exactly `K` edges.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fiedler::{find_fiedler_with, FiedlerOptions};
use crate::graph::SparsificationProblem;

/// A 0/1 choice over the candidate edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinarySelection {
    bits: Vec<bool>,
}

impl BinarySelection {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_indices(m: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut bits = vec![false; m];
        for i in indices {
            bits[i] = true;
        }
        Self { bits }
    }

    pub fn none(m: usize) -> Self {
        Self {
            bits: vec![false; m],
        }
    }

    pub fn all(m: usize) -> Self {
        Self {
            bits: vec![true; m],
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Indices of the `k` largest values, ties broken by lowest index.
pub(crate) fn top_k(values: &[f64], k: usize) -> BinarySelection {
    assert!(k <= values.len(), "top_k: k = {k} > {}", values.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    BinarySelection::from_indices(values.len(), order.into_iter().take(k))
}

/// Keeps the `k` largest entries of `x`: the closest `k`-sparse binary vector.
pub fn round_nearest(x: &[f64], k: usize) -> BinarySelection {
    top_k(x, k)
}

/// Madow systematic sampling.
///
/// With cumulative sums `φ_0 = 0, φ_j = φ_{j-1} + x_j` and a single uniform
/// draw `U ∈ [0, 1)`, index `j` is selected when `φ_{j-1} ≤ U + i < φ_j` for
/// some `i ∈ {0, …, k-1}`. Inclusion probabilities equal `x_j`, and exactly
/// `k` indices are selected.
pub fn round_madow(x: &[f64], k: usize, seed: u64) -> Result<BinarySelection> {
    let m = x.len();
    if k > m {
        return Err(Error::BudgetTooLarge { budget: k, m });
    }
    if let Some(bad) = x.iter().find(|v| !(0.0..=1.0 + 1e-9).contains(*v)) {
        return Err(Error::InfeasibleSelection(format!(
            "entry {bad} lies outside [0, 1]"
        )));
    }
    if k == 0 {
        return Ok(BinarySelection::none(m));
    }
    let total: f64 = x.iter().sum();
    if (total - k as f64).abs() > 1e-6 * (k as f64).max(1.0) {
        return Err(Error::InfeasibleSelection(format!(
            "entries sum to {total}, expected {k}"
        )));
    }
    let scale = k as f64 / total;

    let mut cumulative = Vec::with_capacity(m);
    let mut acc = 0.0;
    for &v in x {
        acc += v.min(1.0) * scale;
        cumulative.push(acc);
    }
    // trailing drift would otherwise leave the last threshold uncovered
    let last_positive = x.iter().rposition(|&v| v > 0.0).expect("total is positive");
    for c in &mut cumulative[last_positive..] {
        *c = k as f64;
    }

    let u: f64 = ChaCha8Rng::seed_from_u64(seed).gen();
    let mut bits = vec![false; m];
    let mut j = 0;
    for i in 0..k {
        let t = u + i as f64;
        while j < m && cumulative[j] <= t {
            j += 1;
        }
        if j == m {
            break;
        }
        bits[j] = true;
        // half-open intervals of width ≤ 1 hold at most one threshold
        j += 1;
    }
    let mut selection = BinarySelection::from_bits(bits);
    if selection.count() < k {
        // only reachable through floating-point round-off
        let mut missing = k - selection.count();
        let mut order: Vec<usize> = (0..m).filter(|&i| !selection.bits[i]).collect();
        order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
        for i in order {
            if missing == 0 {
                break;
            }
            selection.bits[i] = true;
            missing -= 1;
        }
    }
    Ok(selection)
}

/// `λ₂` of the fixed edges plus the selected candidates.
pub fn evaluate_selection(
    problem: &SparsificationProblem,
    selection: &BinarySelection,
    opts: &FiedlerOptions,
) -> Result<f64> {
    let lap = problem.laplacian_of_selection(selection.bits())?;
    Ok(find_fiedler_with(&lap, None, opts)?.lambda2)
}

/// Runs Madow sampling `draws` times (seeds `seed, seed+1, …`) and keeps the
/// draw with the largest connectivity; ties keep the earliest draw.
pub fn round_madow_best_of(
    problem: &SparsificationProblem,
    x: &[f64],
    seed: u64,
    draws: usize,
    opts: &FiedlerOptions,
) -> Result<(BinarySelection, f64)> {
    let k = problem.budget();
    let mut best: Option<(BinarySelection, f64)> = None;
    for r in 0..draws.max(1) {
        let sel = round_madow(x, k, seed.wrapping_add(r as u64))?;
        let value = evaluate_selection(problem, &sel, opts)?;
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((sel, value));
        }
    }
    Ok(best.expect("at least one draw"))
}
