//! Exact quantities on pairs of mixing-weight vectors.
//!
//! When the components have disjoint supports, the L1 distance between two
//! mixtures is attained by a union of whole components: those with
//! `φᵢ¹ > φᵢ²`. The gap measures how different the two samples look once
//! restricted to any group of two or more components, and sets the DSC
//! stopping threshold `τ = g/8`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabeledDataset};
use crate::error::{Error, Result};
use crate::mixture::{normalized, Component, MixtureSpec};
use crate::rng::RngHandle;

/// Largest `K` for exact subset enumeration.
pub const MAX_EXACT_COMPONENTS: usize = 20;

fn validated_pair(phi1: &[f64], phi2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if phi1.len() != phi2.len() {
        return Err(Error::InvalidWeights(format!(
            "weight vectors have lengths {} and {}",
            phi1.len(),
            phi2.len()
        )));
    }
    Ok((normalized(phi1)?, normalized(phi2)?))
}

/// The components where the first sample is heavier, and the L1 distance
/// `Σ max(φᵢ¹ − φᵢ², 0)` they attain.
pub fn l1_optimal_set(phi1: &[f64], phi2: &[f64]) -> Result<(Vec<usize>, f64)> {
    let (p, q) = validated_pair(phi1, phi2)?;
    let set: Vec<usize> = (0..p.len()).filter(|&i| p[i] > q[i]).collect();
    let value = set.iter().map(|&i| p[i] - q[i]).sum();
    Ok((set, value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub gap: f64,
    /// The subset `I` attaining the minimum.
    pub witness_subset: Vec<usize>,
    /// The component `i ∈ I` attaining the minimum.
    pub witness_index: usize,
    /// Smallest entry over both weight vectors.
    pub bounded_b: f64,
    pub recommended_tau: f64,
}

/// Minimum over subsets `I` with `|I| > 1` and `i ∈ I` of
/// `|φᵢ¹ / Σ_I φ¹ − φᵢ² / Σ_I φ²|`, by exhaustive enumeration.
///
/// Subsets on which either sample has zero total weight have no
/// conditional weights and are skipped; if every subset is skipped the gap
/// is reported as 0.
pub fn compute_gap(phi1: &[f64], phi2: &[f64]) -> Result<GapReport> {
    let (p, q) = validated_pair(phi1, phi2)?;
    let k = p.len();
    if k < 2 {
        return Err(Error::InvalidWeights("the gap needs at least two components".into()));
    }
    if k > MAX_EXACT_COMPONENTS {
        return Err(Error::TooManyComponents {
            k,
            max: MAX_EXACT_COMPONENTS,
        });
    }
    let mut best: Option<(f64, u32, usize)> = None;
    for mask in 1u32..(1 << k) {
        if mask.count_ones() < 2 {
            continue;
        }
        let members = || (0..k).filter(move |i| mask & (1 << i) != 0);
        let s1: f64 = members().map(|i| p[i]).sum();
        let s2: f64 = members().map(|i| q[i]).sum();
        if s1 <= 0.0 || s2 <= 0.0 {
            continue;
        }
        for i in members() {
            let d = (p[i] / s1 - q[i] / s2).abs();
            if best.is_none_or(|(b, _, _)| d < b) {
                best = Some((d, mask, i));
            }
        }
    }
    let (gap, mask, witness_index) = best.unwrap_or((0.0, 0, 0));
    let bounded_b = p.iter().chain(&q).copied().fold(f64::INFINITY, f64::min);
    Ok(GapReport {
        gap,
        witness_subset: (0..k).filter(|i| mask & (1 << i) != 0).collect(),
        witness_index,
        bounded_b,
        recommended_tau: gap / 8.0,
    })
}

/// All subsets maximizing `D₁(A) − D₂(A)` over unions of components.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSearch {
    pub best_value: f64,
    /// Maximizers within the search tolerance, each sorted ascending.
    pub maximizers: Vec<Vec<usize>>,
}

/// Exhaustive search over all `2ᴷ` unions of components. Subsets within
/// `tol` of the best value are all reported as maximizers.
pub fn brute_force_l1(phi1: &[f64], phi2: &[f64], tol: f64) -> Result<SubsetSearch> {
    let (p, q) = validated_pair(phi1, phi2)?;
    let k = p.len();
    if k > MAX_EXACT_COMPONENTS {
        return Err(Error::TooManyComponents {
            k,
            max: MAX_EXACT_COMPONENTS,
        });
    }
    let values: Vec<f64> = (0u32..(1 << k))
        .map(|mask| (0..k).filter(|i| mask & (1 << i) != 0).map(|i| p[i] - q[i]).sum())
        .collect();
    let best_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let maximizers = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v >= best_value - tol)
        .map(|(mask, _)| (0..k).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    Ok(SubsetSearch { best_value, maximizers })
}

/// `err(A) = D₁(X∖A) + D₂(A)`: the error of the classifier that predicts the
/// first sample exactly on the components in `subset`, summed over the two
/// equally weighted samples.
pub fn subset_error(phi1: &[f64], phi2: &[f64], subset: &[usize]) -> Result<f64> {
    let (p, q) = validated_pair(phi1, phi2)?;
    if let Some(&bad) = subset.iter().find(|&&i| i >= p.len()) {
        return Err(Error::invalid(format!("component {bad} out of range")));
    }
    let mut inside = vec![false; p.len()];
    subset.iter().for_each(|&i| inside[i] = true);
    Ok((0..p.len()).map(|i| if inside[i] { q[i] } else { p[i] }).sum())
}

/// Sizes and thresholds from the clustering-tree guarantee, as a calculator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Constants {
    /// `[g²b/160K, bg/8K, g²b/4K(K+3), ε*g/4K]`.
    pub epsilon_terms: [f64; 4],
    /// The minimum of `epsilon_terms`.
    pub epsilon_cap: f64,
    /// `4εK/g` at `ε = epsilon_cap`.
    pub gamma_k: f64,
    /// `δ*/4K`.
    pub delta: f64,
    /// `max(4N₁/b, (2/b²)·ln(1/δ))`.
    pub n: f64,
}

pub fn theorem2_constants(
    g: f64,
    b: f64,
    k: usize,
    eps_star: f64,
    delta_star: f64,
    oracle_n1: u64,
) -> Result<Theorem2Constants> {
    for (name, v) in [("g", g), ("b", b), ("eps_star", eps_star), ("delta_star", delta_star)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    if k == 0 || oracle_n1 == 0 {
        return Err(Error::invalid("K and N₁ must be positive"));
    }
    let kf = k as f64;
    let epsilon_terms = [
        g * g * b / (160.0 * kf),
        b * g / (8.0 * kf),
        g * g * b / (4.0 * kf * (kf + 3.0)),
        eps_star * g / (4.0 * kf),
    ];
    let epsilon_cap = epsilon_terms.iter().copied().fold(f64::INFINITY, f64::min);
    let delta = delta_star / (4.0 * kf);
    let n = (4.0 * oracle_n1 as f64 / b).max(2.0 / (b * b) * (1.0 / delta).ln());
    Ok(Theorem2Constants {
        epsilon_terms,
        epsilon_cap,
        gamma_k: 4.0 * epsilon_cap * kf / g,
        delta,
        n,
    })
}

/// Disjoint half-open intervals of an interval-component spec, in component
/// order.
fn intervals(spec: &MixtureSpec) -> Result<Vec<(f64, f64)>> {
    let comps = spec
        .components()
        .ok_or_else(|| Error::invalid("interval components are required"))?;
    let mut iv = Vec::with_capacity(comps.len());
    for c in comps {
        match c {
            Component::Interval { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => iv.push((*lo, *hi)),
            Component::Interval { lo, hi } => {
                return Err(Error::invalid(format!("invalid interval [{lo}, {hi})")))
            }
            _ => return Err(Error::invalid("every component must be an interval")),
        }
    }
    let mut sorted = iv.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in sorted.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::OverlappingSupports(w[0].0, w[0].1, w[1].0, w[1].1));
        }
    }
    Ok(iv)
}

/// Draw labelled 1-D samples from the first two rows of `spec`: pick a
/// component by its weight, then a uniform point in its interval.
pub fn discrete_dsc_simulate(
    spec: &MixtureSpec,
    n1: usize,
    n2: usize,
    rng: RngHandle,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if spec.num_samples() < 2 {
        return Err(Error::invalid("two weight rows are required"));
    }
    let iv = intervals(spec)?;
    let draw = |row: usize, n: usize, handle: RngHandle| -> Result<LabeledDataset> {
        let mut rng = handle.rng();
        let pick = WeightedIndex::new(spec.row(row)).map_err(|e| Error::InvalidWeights(e.to_string()))?;
        let mut xs = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let c = pick.sample(&mut rng);
            let (lo, hi) = iv[c];
            xs.push(lo + (hi - lo) * rng.random::<f64>());
            labels.push(c);
        }
        LabeledDataset::new(Dataset::from_flat(1, xs, format!("{}", row + 1))?, labels)
    };
    Ok((draw(0, n1, rng.split(0))?, draw(1, n2, rng.split(1))?))
}
