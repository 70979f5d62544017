use serde::{Deserialize, Serialize};

use super::distance::Metric;
use crate::energy::CbeVector;
use crate::error::{Error, Result};

pub const MAX_LLOYD_ITERATIONS: usize = 100;

/// Up to this many points, every two-way split is also scored and the
/// cheapest one replaces Lloyd's answer if it is strictly better.
pub const EXACT_SPLIT_LIMIT: usize = 10;

/// Two-way split of a set of vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Cluster (0 or 1) of every input, in input order.
    pub assignment: Vec<usize>,
    pub centers: [Vec<f64>; 2],
    pub inter_center_distance: f64,
    pub metric: Metric,
    /// Lloyd iterations run; 0 for the degenerate all-identical input.
    pub iterations: usize,
}

impl ClusterResult {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn size(&self, cluster: usize) -> usize {
        self.assignment.iter().filter(|&&a| a == cluster).count()
    }

    pub fn center_l1(&self, cluster: usize) -> f64 {
        self.centers[cluster].iter().map(|v| v.abs()).sum()
    }

    /// True when every input landed in one cluster (identical inputs).
    pub fn is_degenerate(&self) -> bool {
        self.size(0) == 0 || self.size(1) == 0
    }
}

/// Sum over points of the distance to their assigned center.
pub fn within_cost(
    points: &[&[f64]],
    assignment: &[usize],
    centers: &[Vec<f64>; 2],
    metric: Metric,
) -> Result<f64> {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &a)| metric.distance(p, &centers[a]))
        .sum()
}

fn centers_of(points: &[&[f64]], assignment: &[usize], metric: Metric) -> [Vec<f64>; 2] {
    let pick = |c: usize| -> Vec<&[f64]> {
        points
            .iter()
            .zip(assignment)
            .filter(|(_, &a)| a == c)
            .map(|(p, _)| *p)
            .collect()
    };
    let (m0, m1) = (pick(0), pick(1));
    [metric.centroid(&m0), metric.centroid(&m1)]
}

/// Lloyd's algorithm with K = 2 under `metric`.
///
/// * init: the two points at maximal pairwise distance (first such pair in
///   index order), the lower index seeding cluster 0
/// * assignment ties go to cluster 0
/// * an emptied cluster takes the point farthest from its own center
/// * stops when the assignment repeats, or after 100 iterations
/// * for at most [`EXACT_SPLIT_LIMIT`] points, the split with the lowest
///   [`within_cost`] is found by enumeration and kept if it beats Lloyd's
///   local optimum; the cluster holding the first init point stays 0
///
/// If all points are mutually at distance 0 the result is degenerate: every
/// point in cluster 0, both centers equal, inter-center distance 0.
pub fn two_means(points: &[&[f64]], metric: Metric) -> Result<ClusterResult> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "clustering needs at least 2 vectors, got {}",
            points.len()
        )));
    }
    let len = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != len) {
        return Err(Error::LengthMismatch {
            left: len,
            right: p.len(),
        });
    }

    let n = points.len();
    let mut best = (0, 1, f64::NEG_INFINITY);
    for i in 0..n {
        for j in i + 1..n {
            let d = metric.distance(points[i], points[j])?;
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    if best.2 <= 0.0 {
        let c = metric.centroid(points);
        return Ok(ClusterResult {
            assignment: vec![0; n],
            centers: [c.clone(), c],
            inter_center_distance: 0.0,
            metric,
            iterations: 0,
        });
    }

    let mut centers = [
        metric.centroid(&[points[best.0]]),
        metric.centroid(&[points[best.1]]),
    ];
    let mut assignment: Vec<usize> = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_LLOYD_ITERATIONS {
        iterations += 1;
        let mut next = Vec::with_capacity(n);
        let mut dist_to_own = Vec::with_capacity(n);
        for p in points {
            let d0 = metric.distance(p, &centers[0])?;
            let d1 = metric.distance(p, &centers[1])?;
            if d1 < d0 {
                next.push(1);
                dist_to_own.push(d1);
            } else {
                next.push(0);
                dist_to_own.push(d0);
            }
        }
        for empty in 0..2 {
            if next.iter().all(|&a| a != empty) {
                let far = (0..n)
                    .max_by(|&a, &b| dist_to_own[a].total_cmp(&dist_to_own[b]).then(b.cmp(&a)))
                    .expect("n >= 2");
                next[far] = empty;
            }
        }
        let unchanged = next == assignment;
        assignment = next;
        centers = centers_of(points, &assignment, metric);
        if unchanged {
            break;
        }
    }
    if n <= EXACT_SPLIT_LIMIT {
        let mut cost = within_cost(points, &assignment, &centers, metric)?;
        for mask in 1u32..(1 << (n - 1)) {
            // Bit i places point i + 1 opposite point 0.
            let mut split: Vec<usize> = (0..n)
                .map(|i| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize })
                .collect();
            if split[best.0] == 1 {
                split.iter_mut().for_each(|a| *a = 1 - *a);
            }
            let c = centers_of(points, &split, metric);
            let candidate = within_cost(points, &split, &c, metric)?;
            if candidate < cost - 1e-12 {
                (cost, assignment, centers) = (candidate, split, c);
            }
        }
    }
    let inter_center_distance = metric.distance(&centers[0], &centers[1])?;
    Ok(ClusterResult {
        assignment,
        centers,
        inter_center_distance,
        metric,
        iterations,
    })
}

/// K-WMeans: [`two_means`] under the Wasserstein-1 metric over CBE vectors.
/// The procedure is deterministic; `seed` is accepted for interface
/// stability and does not influence the result.
pub fn k_wmeans(cbes: &[CbeVector], seed: u64) -> Result<ClusterResult> {
    cluster_cbes(cbes, Metric::Wasserstein, seed)
}

pub fn cluster_cbes(cbes: &[CbeVector], metric: Metric, _seed: u64) -> Result<ClusterResult> {
    let points: Vec<&[f64]> = cbes.iter().map(|c| c.values.as_slice()).collect();
    two_means(&points, metric)
}
