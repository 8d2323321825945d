//! Scoring: best-assignment accuracy and the exact sign test.

use crate::error::{Error, Result};

/// Largest `max(J, K)` scored by trying every permutation.
pub const EXHAUSTIVE_LIMIT: usize = 8;

/// Map arbitrary ids to `0..n` in ascending order of id.
fn compact(ids: &[usize]) -> (Vec<usize>, usize) {
    let mut distinct = ids.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mapped = ids
        .iter()
        .map(|id| distinct.binary_search(id).expect("id is present"))
        .collect();
    (mapped, distinct.len())
}

/// `counts[p][t]` = number of points in predicted cluster `p` with true
/// component `t`, padded with zeros to a square of side `max(J, K)`.
fn confusion(predicted: &[usize], truth: &[usize], k: usize) -> Vec<Vec<u64>> {
    let (p, j) = compact(predicted);
    let (t, kk) = compact(truth);
    let side = j.max(kk).max(k);
    let mut c = vec![vec![0u64; side]; side];
    for (a, b) in p.iter().zip(&t) {
        c[*a][*b] += 1;
    }
    c
}

/// Fraction of points whose predicted cluster maps to their true component
/// under the best injective map from clusters to components. Clusters left
/// without a component count as errors.
pub fn accuracy_best_assignment(predicted: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let c = confusion(predicted, truth, k);
    let matched = if c.len() <= EXHAUSTIVE_LIMIT {
        best_matching_exhaustive(&c)
    } else {
        best_matching_hungarian(&c)
    };
    Ok(matched as f64 / truth.len() as f64)
}

/// Maximum of `Σ c[i][σ(i)]` over all permutations `σ`, by enumeration.
pub fn best_matching_exhaustive(c: &[Vec<u64>]) -> u64 {
    fn go(c: &[Vec<u64>], row: usize, used: &mut [bool]) -> u64 {
        if row == c.len() {
            return 0;
        }
        let mut best = 0;
        for col in 0..c.len() {
            if !used[col] {
                used[col] = true;
                best = best.max(c[row][col] + go(c, row + 1, used));
                used[col] = false;
            }
        }
        best
    }
    go(c, 0, &mut vec![false; c.len()])
}

/// Maximum of `Σ c[i][σ(i)]` over all permutations `σ`, by the Hungarian
/// method with row and column potentials (O(n³)).
pub fn best_matching_hungarian(c: &[Vec<u64>]) -> u64 {
    let n = c.len();
    if n == 0 {
        return 0;
    }
    let top = c.iter().flatten().copied().max().unwrap_or(0) as i64;
    // minimise top - c; 1-based arrays with a virtual column 0
    let cost = |i: usize, j: usize| top - c[i - 1][j - 1] as i64;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| c[owner[j] - 1][j - 1]).sum()
}

/// One-sided exact sign test: `P[X ≥ wins]` for `X ~ Bin(trials, ½)`.
/// Ties are expected to be excluded from `trials` by the caller.
pub fn sign_test_pvalue(wins: u64, trials: u64) -> Result<f64> {
    if wins > trials {
        return Err(Error::invalid(format!("wins ({wins}) exceed trials ({trials})")));
    }
    if wins == 0 {
        return Ok(1.0);
    }
    let n = trials as f64;
    let ln_half_n = n * std::f64::consts::LN_2;
    // ln C(n, k) built incrementally from ln C(n, wins)
    let mut ln_c: f64 = (0..wins).map(|i| ((trials - i) as f64).ln() - ((i + 1) as f64).ln()).sum();
    let mut terms = Vec::with_capacity((trials - wins + 1) as usize);
    for k in wins..=trials {
        terms.push(ln_c - ln_half_n);
        if k < trials {
            ln_c += ((trials - k) as f64).ln() - ((k + 1) as f64).ln();
        }
    }
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p = m.exp() * terms.iter().map(|t| (t - m).exp()).sum::<f64>();
    Ok(p.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy_best_assignment(&[0, 0, 1, 2], &[0, 0, 1, 2], 3).unwrap(), 1.0);
        assert_eq!(accuracy_best_assignment(&[5, 5, 9, 1], &[0, 0, 1, 2], 3).unwrap(), 1.0);
        assert_eq!(accuracy_best_assignment(&[0, 0, 0, 1], &[1, 1, 2, 2], 2).unwrap(), 0.75);
        assert!(accuracy_best_assignment(&[0], &[0, 1], 2).is_err());
        // one cluster for everything: only the largest component is matched
        assert_eq!(accuracy_best_assignment(&[0; 5], &[0, 0, 0, 1, 2], 3).unwrap(), 0.6);
    }

    #[test]
    fn hungarian_matches_exhaustive() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) % 50
        };
        for n in 1..=7 {
            for _ in 0..30 {
                let c: Vec<Vec<u64>> = (0..n).map(|_| (0..n).map(|_| next()).collect()).collect();
                assert_eq!(best_matching_exhaustive(&c), best_matching_hungarian(&c));
            }
        }
    }

    #[test]
    fn large_label_sets_use_hungarian() {
        let truth: Vec<usize> = (0..200).map(|i| i % 12).collect();
        let pred: Vec<usize> = truth.iter().map(|t| (t * 7 + 3) % 12 + 100).collect();
        assert_eq!(accuracy_best_assignment(&pred, &truth, 12).unwrap(), 1.0);
    }

    #[test]
    fn sign_test_values() {
        assert!((sign_test_pvalue(10, 10).unwrap() - 2f64.powi(-10)).abs() < 1e-15);
        assert!(sign_test_pvalue(5, 10).unwrap() >= 0.5);
        assert!(sign_test_pvalue(90, 100).unwrap() < 0.01);
        assert_eq!(sign_test_pvalue(0, 0).unwrap(), 1.0);
        assert!(sign_test_pvalue(3, 2).is_err());
        // P[X >= 1 | n=1] = 1/2
        assert!((sign_test_pvalue(1, 1).unwrap() - 0.5).abs() < 1e-15);
    }
}
