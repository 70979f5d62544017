use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{average, check_updates, ids, DefenseOutcome, Diagnostics, LocalUpdate};
use crate::cluster::{cluster_cbes, majority_select, select_clusters, Metric};
use crate::energy::{cbe, model_be, CbeVector, LayerPolicy};
use crate::error::{Error, Result};

/// Which of the two clusters survives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Lower center norm, or everyone when the centers are within ε.
    #[default]
    CenterNorm,
    /// Larger cluster.
    Majority,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::CenterNorm => "center_norm",
            Selection::Majority => "majority",
        })
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "center_norm" => Ok(Selection::CenterNorm),
            "majority" => Ok(Selection::Majority),
            other => Err(Error::Config(format!("unknown selection '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarsParams {
    /// Percent of each layer's channels kept in the CBE.
    pub kappa: f64,
    pub epsilon: f64,
    pub layer_policy: LayerPolicy,
    pub selection: Selection,
    pub metric: Metric,
}

impl Default for MarsParams {
    fn default() -> Self {
        Self {
            kappa: 5.0,
            epsilon: 0.03,
            layer_policy: LayerPolicy::ConvBnOnly,
            selection: Selection::CenterNorm,
            metric: Metric::Wasserstein,
        }
    }
}

/// Scores every model by backdoor energy, splits the CBE vectors in two and
/// averages the surviving cluster.
pub fn mars(updates: &[LocalUpdate], params: &MarsParams) -> Result<DefenseOutcome> {
    check_updates(updates)?;
    if !(params.epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {}", params.epsilon)));
    }
    let cbes: Vec<CbeVector> = updates
        .par_iter()
        .map(|u| cbe(&model_be(&u.model, params.layer_policy)?, params.kappa))
        .collect::<Result<_>>()?;
    let mut diagnostics = Diagnostics {
        cbes: Some(cbes.iter().map(|c| c.values.clone()).collect()),
        ..Diagnostics::default()
    };

    if updates.len() == 1 {
        diagnostics
            .warnings
            .push("single update: passed through without clustering".into());
        return Ok(DefenseOutcome {
            selected_ids: ids(updates, &[0]),
            global: updates[0].model.clone(),
            diagnostics,
        });
    }

    let result = cluster_cbes(&cbes, params.metric, 0)?;
    let chosen = match params.selection {
        Selection::CenterNorm => select_clusters(&result, params.epsilon),
        Selection::Majority => majority_select(&result),
    };
    log::debug!(
        "mars: distance {:.6}, cluster sizes {}/{}, kept {}",
        result.inter_center_distance,
        result.size(0),
        result.size(1),
        chosen.len()
    );
    diagnostics.cluster = Some(result);
    Ok(DefenseOutcome {
        selected_ids: ids(updates, &chosen),
        global: average(updates, &chosen)?,
        diagnostics,
    })
}
