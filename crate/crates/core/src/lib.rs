//! Learning mixture models from several samples drawn with different mixing
//! weights.
//!
//! * [`msp`] projects data onto the affine span of the sample means, which
//!   contains the component means.
//! * [`dsc`] builds a tree of classifiers that separate two samples; its
//!   leaves are clusters aligned with the component supports.
//! * [`baselines`] holds k-means, random projection and PCA for comparison.
//! * [`theory`] computes exact quantities (L1 distance, gap) on weight vectors.
//! * [`bench`] generates synthetic Gaussian mixtures and runs comparisons.

pub mod baselines;
pub mod bench;
pub mod data;
pub mod dsc;
pub mod error;
pub mod mixture;
pub mod msp;
pub mod oracle;
pub mod rng;
pub mod theory;

pub use data::{load_dataset, weighted_mean, Dataset, LabeledDataset, Point};
pub use error::{Error, Result};
pub use mixture::MixtureSpec;
pub use rng::RngHandle;
