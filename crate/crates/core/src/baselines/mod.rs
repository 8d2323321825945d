//! Reference algorithms the multi-sample methods are compared against:
//! k-means on the pooled data, and k-means after a random or a
//! maximal-variance (PCA) projection.

mod kmeans;
mod projection;

pub use kmeans::{kmeans, lloyd, KMeansResult, LloydRun, DEFAULT_MAX_ITER, DEFAULT_RESTARTS};
pub use projection::{
    pca_projection, random_projection, random_projection_matrix, random_projection_with_matrix, PcaProjection,
};
