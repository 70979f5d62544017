use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{rng_at, stream};

/// Disjoint per-client index lists covering a dataset exactly once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub alpha: f64,
    pub client_count: usize,
    pub assignment: Vec<Vec<usize>>,
}

impl PartitionPlan {
    /// Per-client class counts.
    pub fn histograms(&self, data: &Dataset) -> Vec<Vec<usize>> {
        self.assignment
            .iter()
            .map(|idx| {
                let mut h = vec![0; data.num_classes()];
                for &i in idx {
                    h[data.label(i)] += 1;
                }
                h
            })
            .collect()
    }
}

/// Label-skewed split: for every class a proportion vector over clients is
/// drawn from `Dir(alpha)` and that class's (shuffled) samples are cut at
/// the cumulative proportions. Clients may end up empty for small `alpha`.
pub fn dirichlet_partition(
    data: &Dataset,
    client_count: usize,
    alpha: f64,
    seed: u64,
) -> Result<PartitionPlan> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if client_count == 0 {
        return Err(Error::InvalidArgument("client_count must be at least 1".into()));
    }
    let mut rng = rng_at(seed, &[stream::PARTITION]);
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::InvalidArgument(format!("gamma({alpha}): {e}")))?;
    let mut assignment = vec![Vec::new(); client_count];
    for class in 0..data.num_classes() {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.label(i) == class).collect();
        members.shuffle(&mut rng);
        let mut weights: Vec<f64> = (0..client_count).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 && total.is_finite() {
            weights.iter_mut().for_each(|w| *w /= total);
        } else {
            // Every draw underflowed (tiny alpha): give the class to one client.
            let lucky = members.len() % client_count;
            weights = vec![0.0; client_count];
            weights[lucky] = 1.0;
        }
        let n = members.len();
        let mut start = 0;
        let mut cumulative = 0.0;
        for (client, w) in weights.iter().enumerate() {
            cumulative += w;
            let end = if client + 1 == client_count {
                n
            } else {
                ((cumulative * n as f64).floor() as usize).clamp(start, n)
            };
            assignment[client].extend_from_slice(&members[start..end]);
            start = end;
        }
    }
    for list in &mut assignment {
        list.sort_unstable();
    }
    Ok(PartitionPlan {
        alpha,
        client_count,
        assignment,
    })
}
