//! Server-side aggregation rules. Every rule sees only client ids and
//! models; which clients are malicious is known to the harness alone.

mod baselines;
mod mars;

use serde::{Deserialize, Serialize};

pub use baselines::{fed_avg, fed_clp, multi_krum, norm_clip, prune_high_energy};
pub use mars::{mars, MarsParams, Selection};

use crate::cluster::ClusterResult;
use crate::error::{Error, Result};
use crate::nn::Model;

/// A client's locally trained model for one round.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalUpdate {
    pub client_id: usize,
    pub model: Model,
}

/// Per-defense evidence, kept so detection rates can be recomputed later.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Multi-Krum scores, in update order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    /// CBE vector of each update, in update order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cbes: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterResult>,
    /// Norm of each update's delta before clipping.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_norms: Option<Vec<f64>>,
    /// Channels pruned per update.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pruned: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefenseOutcome {
    /// Client ids whose models entered the aggregate, ascending.
    pub selected_ids: Vec<usize>,
    pub global: Model,
    pub diagnostics: Diagnostics,
}

pub(crate) fn check_updates(updates: &[LocalUpdate]) -> Result<()> {
    let first = updates
        .first()
        .ok_or_else(|| Error::InvalidArgument("aggregation needs at least one update".into()))?;
    let len = first.model.state_len();
    for u in updates {
        if u.model.state_len() != len || u.model.layers().len() != first.model.layers().len() {
            return Err(Error::LengthMismatch {
                left: len,
                right: u.model.state_len(),
            });
        }
    }
    Ok(())
}

/// Unweighted mean of the full state (parameters and BatchNorm buffers) of
/// the chosen updates.
pub(crate) fn average(updates: &[LocalUpdate], chosen: &[usize]) -> Result<Model> {
    let mut acc = vec![0.0; updates[chosen[0]].model.state_len()];
    for &i in chosen {
        for (a, v) in acc.iter_mut().zip(updates[i].model.state_vector()) {
            *a += v;
        }
    }
    let n = chosen.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    let mut global = updates[chosen[0]].model.clone();
    global.set_state_vector(&acc)?;
    Ok(global)
}

pub(crate) fn ids(updates: &[LocalUpdate], chosen: &[usize]) -> Vec<usize> {
    let mut ids: Vec<usize> = chosen.iter().map(|&i| updates[i].client_id).collect();
    ids.sort_unstable();
    ids
}
