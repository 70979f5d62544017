//! Two-way clustering of CBE vectors and the cluster-selection rules.

mod distance;
mod kmeans;
mod select;

pub use distance::{cosine_distance, euclidean, wasserstein_1d, Metric};
pub use kmeans::{
    cluster_cbes, k_wmeans, two_means, within_cost, ClusterResult, MAX_LLOYD_ITERATIONS, EXACT_SPLIT_LIMIT,
};
pub use select::{majority_select, select_clusters};
