use super::kmeans::ClusterResult;

/// Center-norm selection: every model when the two centers are closer than
/// `epsilon`, otherwise the cluster whose center has the smaller L1 norm
/// (exact tie keeps cluster 0).
pub fn select_clusters(result: &ClusterResult, epsilon: f64) -> Vec<usize> {
    if result.is_degenerate() || result.inter_center_distance < epsilon {
        return (0..result.assignment.len()).collect();
    }
    let keep = if result.center_l1(1) < result.center_l1(0) { 1 } else { 0 };
    result.members(keep)
}

/// Majority selection: the larger cluster, ties broken by smaller center norm.
pub fn majority_select(result: &ClusterResult) -> Vec<usize> {
    if result.is_degenerate() {
        return (0..result.assignment.len()).collect();
    }
    let (s0, s1) = (result.size(0), result.size(1));
    let keep = match s0.cmp(&s1) {
        std::cmp::Ordering::Greater => 0,
        std::cmp::Ordering::Less => 1,
        std::cmp::Ordering::Equal => {
            if result.center_l1(1) < result.center_l1(0) {
                1
            } else {
                0
            }
        }
    };
    result.members(keep)
}
