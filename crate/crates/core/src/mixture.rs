//! Mixing-weight matrices and component descriptions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σᵢ φᵢʲ = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Description of one mixture component, used for synthetic generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    /// Axis-aligned Gaussian with per-coordinate standard deviations.
    Gaussian { mean: Vec<f64>, std_dev: Vec<f64> },
    /// Uniform on the half-open interval `[lo, hi)` of the real line.
    Interval { lo: f64, hi: f64 },
    /// Abstract component, identified only by name.
    Label { name: String },
}

/// The `M × K` matrix of mixing weights `φᵢʲ` (row `j` is sample `j`),
/// optionally with the `K` component descriptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    weights: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    components: Option<Vec<Component>>,
}

impl MixtureSpec {
    pub fn new(weights: Vec<Vec<f64>>, components: Option<Vec<Component>>) -> Result<Self> {
        let k = weights
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidWeights("no weight rows".into()))?;
        if k == 0 {
            return Err(Error::InvalidWeights("K must be at least 1".into()));
        }
        for (j, row) in weights.iter().enumerate() {
            validate_weight_vector(row)
                .map_err(|e| Error::InvalidWeights(format!("row {j}: {e}")))?;
            if row.len() != k {
                return Err(Error::InvalidWeights(format!(
                    "row {j} has {} entries, expected {k}",
                    row.len()
                )));
            }
        }
        if let Some(c) = &components {
            if c.len() != k {
                return Err(Error::InvalidWeights(format!(
                    "{} components for {k} weight columns",
                    c.len()
                )));
            }
        }
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn num_components(&self) -> usize {
        self.weights[0].len()
    }

    pub fn num_samples(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.weights[j]
    }

    pub fn components(&self) -> Option<&[Component]> {
        self.components.as_deref()
    }

    /// Smallest mixing weight over all samples and components.
    pub fn phi_min(&self) -> f64 {
        self.weights
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Check that `w` is a probability vector: non-empty, finite, non-negative
/// entries summing to one within [`WEIGHT_SUM_TOL`].
pub fn validate_weight_vector(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidWeights("empty weight vector".into()));
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidWeights(
            "weights must be finite and non-negative".into(),
        ));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {s}, not 1")));
    }
    Ok(())
}

/// Validate then rescale so the entries sum to exactly one in floating point
/// arithmetic as far as division allows.
pub fn normalized(w: &[f64]) -> Result<Vec<f64>> {
    validate_weight_vector(w)?;
    let s: f64 = w.iter().sum();
    Ok(w.iter().map(|x| x / s).collect())
}
