use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{weighted_mean, Dataset};
use crate::error::{Error, Result};
use crate::msp::orient;
use crate::rng::RngHandle;

fn check_target(d: &Dataset, target_dim: usize) -> Result<()> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if target_dim == 0 || target_dim > d.dim() {
        return Err(Error::invalid(format!(
            "target_dim must lie in 1..={}, got {target_dim}",
            d.dim()
        )));
    }
    Ok(())
}

/// `n × target_dim` matrix of independent `N(0, 1/target_dim)` entries,
/// drawn row by row.
pub fn random_projection_matrix(n: usize, target_dim: usize, rng: RngHandle) -> DMatrix<f64> {
    let mut rng = rng.rng();
    let scale = 1.0 / (target_dim as f64).sqrt();
    let mut m = DMatrix::zeros(n, target_dim);
    for i in 0..n {
        for j in 0..target_dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            m[(i, j)] = z * scale;
        }
    }
    m
}

/// Map every point `x` to `xᵀ R` with a Gaussian random matrix `R`.
pub fn random_projection(d: &Dataset, target_dim: usize, rng: RngHandle) -> Result<Dataset> {
    check_target(d, target_dim)?;
    random_projection_with_matrix(d, &random_projection_matrix(d.dim(), target_dim, rng))
}

/// Map every point `x` to `xᵀ R` for a caller-supplied `n × t` matrix.
pub fn random_projection_with_matrix(d: &Dataset, r: &DMatrix<f64>) -> Result<Dataset> {
    if r.nrows() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: d.dim(),
            found: r.nrows(),
        });
    }
    let t = r.ncols();
    let mut out = Vec::with_capacity(d.len() * t);
    for x in d.rows() {
        for j in 0..t {
            out.push(x.iter().zip(r.column(j).iter()).map(|(a, b)| a * b).sum());
        }
    }
    Dataset::with_weights(t, out, d.weights().to_vec(), d.sample_id())
}

/// Result of [`pca_projection`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// Coordinates of the centered points along `components`.
    pub data: Dataset,
    /// Principal directions, unit norm, first non-zero coordinate positive.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component, non-increasing.
    pub eigenvalues: Vec<f64>,
    pub mean: Vec<f64>,
    /// Set when the data has fewer informative directions than requested;
    /// `components` then holds only the informative ones.
    pub rank_deficient: bool,
}

/// Relative eigenvalue threshold below which a direction carries no variance.
const RANK_TOL: f64 = 1e-10;

/// Project the weighted, centered data onto its `target_dim` directions of
/// largest variance.
///
/// The eigenproblem is solved on the `n × n` covariance when `n` does not
/// exceed the number of points, and on the Gram matrix otherwise.
pub fn pca_projection(d: &Dataset, target_dim: usize) -> Result<PcaProjection> {
    check_target(d, target_dim)?;
    let n = d.dim();
    let mean = weighted_mean(d)?.coords;
    let total = d.total_weight();
    let rows = d.len();
    // rows scaled by sqrt(w / W) so XᵀX is the weighted covariance
    let x = DMatrix::from_fn(rows, n, |i, j| (d.point(i)[j] - mean[j]) * (d.weight(i) / total).sqrt());

    let (mut pairs, top) = if n <= rows {
        let eig = SymmetricEigen::new(x.transpose() * &x);
        let top = eig.eigenvalues.max().max(0.0);
        let pairs: Vec<(f64, Vec<f64>)> = (0..n)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect()))
            .collect();
        (pairs, top)
    } else {
        let eig = SymmetricEigen::new(&x * x.transpose());
        let top = eig.eigenvalues.max().max(0.0);
        let pairs: Vec<(f64, Vec<f64>)> = (0..rows)
            .filter(|&k| eig.eigenvalues[k] > RANK_TOL * top && top > 0.0)
            .map(|k| {
                let lambda = eig.eigenvalues[k];
                let v = x.transpose() * eig.eigenvectors.column(k) / lambda.sqrt();
                (lambda, v.iter().copied().collect())
            })
            .collect();
        (pairs, top)
    };
    if !(top > 0.0) {
        return Err(Error::invalid("data has zero variance; no principal direction exists"));
    }
    pairs.retain(|(l, _)| *l > RANK_TOL * top);
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (_, v) in &mut pairs {
        orient(v);
    }
    let rank_deficient = pairs.len() < target_dim;
    pairs.truncate(target_dim);

    let t = pairs.len();
    let mut out = Vec::with_capacity(rows * t);
    for p in d.rows() {
        for (_, v) in &pairs {
            out.push(v.iter().zip(p.iter().zip(&mean)).map(|(vi, (pi, mi))| vi * (pi - mi)).sum());
        }
    }
    Ok(PcaProjection {
        data: Dataset::with_weights(t, out, d.weights().to_vec(), d.sample_id())?,
        eigenvalues: pairs.iter().map(|(l, _)| *l).collect(),
        components: pairs.into_iter().map(|(_, v)| v).collect(),
        mean,
        rank_deficient,
    })
}
