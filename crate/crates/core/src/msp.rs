//! Multi-sample projection.
//!
//! Given samples `S₁ … S_m` drawn from mixtures of the same components with
//! different mixing weights, each sample mean lies in the affine hull of the
//! component means. The differences of consecutive sample means therefore
//! span (an estimate of) the directions along which the component means
//! differ, and projecting onto them keeps the component means apart while
//! discarding every other direction.
//!
//! The raw difference vectors are kept, and an orthonormal frame for their
//! span is obtained from a singular value decomposition, which also allows
//! truncating directions that are numerically or statistically negligible
//! when many samples are almost co-planar.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{weighted_mean, Dataset, Point};
use crate::error::{Error, Result};

pub const DEFAULT_RANK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MspConfig {
    /// Singular values `σ_d ≤ rank_tol · σ₁` are truncated.
    pub rank_tol: f64,
    /// Hard cap on the retained rank, typically `K − 1` when `K` is known.
    pub max_rank: Option<usize>,
}

impl Default for MspConfig {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            max_rank: None,
        }
    }
}

/// The projection target: an affine subspace through `anchor` spanned by
/// `orthonormal_basis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBasis {
    /// `Ēⱼ − Ēⱼ₊₁` for `j = 1 … m−1`.
    pub raw_vectors: Vec<Vec<f64>>,
    pub orthonormal_basis: Vec<Vec<f64>>,
    pub effective_rank: usize,
    /// All singular values of the raw-vector matrix, non-increasing.
    pub singular_values: Vec<f64>,
    /// The last sample mean, used as the affine origin.
    pub anchor: Vec<f64>,
    /// Norm of each raw vector's component outside the retained span.
    pub residual_norms: Vec<f64>,
}

impl ProjectionBasis {
    pub fn ambient_dim(&self) -> usize {
        self.anchor.len()
    }

    /// A rank-0 basis means the sample means coincide.
    pub fn is_degenerate(&self) -> bool {
        self.effective_rank == 0
    }

    /// Coordinates of `x − anchor` in the orthonormal frame.
    pub fn project_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                found: x.len(),
            });
        }
        if self.is_degenerate() {
            return Err(Error::DegenerateBasis);
        }
        Ok(self
            .orthonormal_basis
            .iter()
            .map(|u| {
                u.iter()
                    .zip(x.iter().zip(&self.anchor))
                    .map(|(ui, (xi, ai))| ui * (xi - ai))
                    .sum()
            })
            .collect())
    }

    /// Map frame coordinates back to the ambient space.
    pub fn reconstruct(&self, coords: &[f64]) -> Result<Vec<f64>> {
        if coords.len() != self.effective_rank {
            return Err(Error::DimensionMismatch {
                expected: self.effective_rank,
                found: coords.len(),
            });
        }
        let mut x = self.anchor.clone();
        for (c, u) in coords.iter().zip(&self.orthonormal_basis) {
            for (xi, ui) in x.iter_mut().zip(u) {
                *xi += c * ui;
            }
        }
        Ok(x)
    }

    /// Re-truncate from the stored raw vectors with a different tolerance or
    /// cap. Used when many sample means are nearly co-planar and the span is
    /// larger than the dimension of the component means' affine hull.
    pub fn reduce_rank(&self, rank_tol: f64, max_rank: Option<usize>) -> Result<ProjectionBasis> {
        basis_from_raw(self.raw_vectors.clone(), self.anchor.clone(), rank_tol, max_rank)
    }
}

/// Element `j` is the weighted mean of `samples[j]`.
pub fn estimate_means(samples: &[Dataset]) -> Result<Vec<Point>> {
    if samples.len() < 2 {
        return Err(Error::invalid("at least two samples are required"));
    }
    let dim = samples[0].dim();
    for s in samples {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.dim(),
            });
        }
        if s.is_empty() {
            return Err(Error::EmptyDataset);
        }
    }
    samples.iter().map(weighted_mean).collect()
}

/// Differences of consecutive means, orthonormalised and rank-truncated.
pub fn build_basis(means: &[Point], rank_tol: f64, max_rank: Option<usize>) -> Result<ProjectionBasis> {
    if means.len() < 2 {
        return Err(Error::invalid("at least two means are required"));
    }
    let dim = means[0].dim();
    for m in means {
        if m.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.dim(),
            });
        }
    }
    let raw: Vec<Vec<f64>> = means
        .windows(2)
        .map(|w| w[0].coords.iter().zip(&w[1].coords).map(|(a, b)| a - b).collect())
        .collect();
    let anchor = means[means.len() - 1].coords.clone();
    basis_from_raw(raw, anchor, rank_tol, max_rank)
}

fn basis_from_raw(
    raw: Vec<Vec<f64>>,
    anchor: Vec<f64>,
    rank_tol: f64,
    max_rank: Option<usize>,
) -> Result<ProjectionBasis> {
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(Error::invalid(format!("rank_tol must lie in (0, 1), got {rank_tol}")));
    }
    if max_rank == Some(0) {
        return Err(Error::invalid("max_rank must be at least 1"));
    }
    let dim = anchor.len();
    let cols = raw.len();
    let mat = DMatrix::from_fn(dim, cols, |i, j| raw[j][i]);

    let svd = mat.clone().svd(true, false);
    let u = svd.u.as_ref().expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let scale = anchor
        .iter()
        .chain(raw.iter().flatten())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let sigma1 = singular_values.first().copied().unwrap_or(0.0);
    let mut rank = if sigma1 <= 64.0 * f64::EPSILON * scale || sigma1 == 0.0 {
        0
    } else {
        singular_values.iter().take_while(|s| **s > rank_tol * sigma1).count()
    };
    if let Some(cap) = max_rank {
        rank = rank.min(cap);
    }

    let orthonormal_basis: Vec<Vec<f64>> = order[..rank]
        .iter()
        .map(|&c| {
            let mut v: Vec<f64> = u.column(c).iter().copied().collect();
            orient(&mut v);
            v
        })
        .collect();

    let residual_norms = raw
        .iter()
        .map(|v| {
            let mut r = v.clone();
            for b in &orthonormal_basis {
                let c: f64 = b.iter().zip(v).map(|(x, y)| x * y).sum();
                for (ri, bi) in r.iter_mut().zip(b) {
                    *ri -= c * bi;
                }
            }
            r.iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .collect();

    Ok(ProjectionBasis {
        raw_vectors: raw,
        orthonormal_basis,
        effective_rank: rank,
        singular_values,
        anchor,
        residual_norms,
    })
}

/// Flip `v` so its first clearly non-zero coordinate is positive.
pub(crate) fn orient(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * norm.max(1e-300)) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Means, then basis, in one call.
pub fn fit(samples: &[Dataset], cfg: &MspConfig) -> Result<ProjectionBasis> {
    let means = estimate_means(samples)?;
    build_basis(&means, cfg.rank_tol, cfg.max_rank)
}

/// Coordinates of every point of `d` in the basis frame. Weights and sample
/// id carry over.
pub fn project(basis: &ProjectionBasis, d: &Dataset) -> Result<Dataset> {
    if d.dim() != basis.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.ambient_dim(),
            found: d.dim(),
        });
    }
    if basis.is_degenerate() {
        return Err(Error::DegenerateBasis);
    }
    let mut coords = Vec::with_capacity(d.len() * basis.effective_rank);
    for row in d.rows() {
        coords.extend(basis.project_point(row)?);
    }
    Dataset::with_weights(
        basis.effective_rank,
        coords,
        d.weights().to_vec(),
        d.sample_id().to_string(),
    )
}

/// Inputs of the sample-size bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MspBoundParams {
    /// Largest variance of any component in any direction.
    pub sigma_max_sq: f64,
    /// `A = maxᵢ Σⱼ |αⱼⁱ|` where `μᵢ = Σⱼ αⱼⁱ vⱼ`.
    pub coeff_bound: f64,
    pub dims: usize,
    pub sample_sizes: Vec<usize>,
}

impl MspBoundParams {
    fn validate(&self) -> Result<()> {
        let ok = self.sigma_max_sq > 0.0
            && self.coeff_bound > 0.0
            && self.dims > 0
            && !self.sample_sizes.is_empty()
            && self.sample_sizes.iter().all(|n| *n > 0);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("bound parameters must all be strictly positive"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MspBounds {
    /// Bound on `Pr[supⱼ ‖Eⱼ − Ēⱼ‖ > ε]`.
    pub mean_deviation: f64,
    /// Bound on the probability that some projected pairwise component-mean
    /// distance is off by more than `ε`.
    pub distance_distortion: f64,
}

/// Chebyshev/union-bound failure probabilities, clipped to `[0, 1]`.
pub fn msp_bound(params: &MspBoundParams, epsilon: f64) -> Result<MspBounds> {
    params.validate()?;
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let inv_sizes: f64 = params.sample_sizes.iter().map(|n| 1.0 / *n as f64).sum();
    let base = params.dims as f64 * params.sigma_max_sq / (epsilon * epsilon) * inv_sizes;
    let a = params.coeff_bound;
    Ok(MspBounds {
        mean_deviation: base.clamp(0.0, 1.0),
        distance_distortion: (4.0 * a * a * base).clamp(0.0, 1.0),
    })
}

/// Arithmetic operation count of the projection step: one pass over every
/// coordinate of every point for the means, then `2n` per difference vector.
pub fn operation_count(dim: usize, sample_sizes: &[usize]) -> u64 {
    let n = dim as u64;
    let total: u64 = sample_sizes.iter().map(|s| *s as u64).sum();
    n * total + 2 * n * (sample_sizes.len().saturating_sub(1) as u64)
}
