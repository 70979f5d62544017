use rayon::prelude::*;

use super::{average, check_updates, ids, DefenseOutcome, Diagnostics, LocalUpdate};
use crate::energy::{layer_be, LayerPolicy};
use crate::error::{Error, Result};
use crate::nn::{Layer, Model};

fn everyone(updates: &[LocalUpdate]) -> Vec<usize> {
    (0..updates.len()).collect()
}

pub fn fed_avg(updates: &[LocalUpdate]) -> Result<DefenseOutcome> {
    check_updates(updates)?;
    let all = everyone(updates);
    Ok(DefenseOutcome {
        selected_ids: ids(updates, &all),
        global: average(updates, &all)?,
        diagnostics: Diagnostics::default(),
    })
}

/// Multi-Krum: score each update by the summed squared distance to its
/// `n − f − 2` nearest peers and average the `m` lowest scores (ties by
/// position).
pub fn multi_krum(updates: &[LocalUpdate], f: usize, m: usize) -> Result<DefenseOutcome> {
    check_updates(updates)?;
    let n = updates.len();
    if n < f + 3 {
        return Err(Error::Config(format!(
            "multi-krum needs n - f - 2 >= 1, got n = {n}, f = {f}"
        )));
    }
    if m == 0 || m > n {
        return Err(Error::Config(format!("multi-krum m must lie in [1, {n}], got {m}")));
    }
    let flat: Vec<Vec<f64>> = updates.iter().map(|u| u.model.state_vector()).collect();
    let neighbours = n - f - 2;
    let scores: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| flat[i].iter().zip(&flat[j]).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect();
            d.sort_by(f64::total_cmp);
            d[..neighbours].iter().sum()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut chosen = order[..m].to_vec();
    chosen.sort_unstable();
    Ok(DefenseOutcome {
        selected_ids: ids(updates, &chosen),
        global: average(updates, &chosen)?,
        diagnostics: Diagnostics {
            scores: Some(scores),
            ..Diagnostics::default()
        },
    })
}

/// Scales each delta from `previous` to norm at most `bound`, then adds the
/// mean clipped delta back onto `previous`.
pub fn norm_clip(updates: &[LocalUpdate], bound: f64, previous: &Model) -> Result<DefenseOutcome> {
    check_updates(updates)?;
    if !(bound > 0.0) {
        return Err(Error::Config(format!("clip bound must be positive, got {bound}")));
    }
    let base = previous.state_vector();
    if base.len() != updates[0].model.state_len() {
        return Err(Error::LengthMismatch {
            left: base.len(),
            right: updates[0].model.state_len(),
        });
    }
    let mut acc = vec![0.0; base.len()];
    let mut norms = Vec::with_capacity(updates.len());
    for u in updates {
        let delta: Vec<f64> = u.model.state_vector().iter().zip(&base).map(|(a, b)| a - b).collect();
        let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        let scale = if norm > bound { bound / norm } else { 1.0 };
        for (a, d) in acc.iter_mut().zip(&delta) {
            *a += scale * d;
        }
        norms.push(norm);
    }
    let n = updates.len() as f64;
    let state: Vec<f64> = base.iter().zip(&acc).map(|(b, a)| b + a / n).collect();
    let mut global = previous.clone();
    global.set_state_vector(&state)?;
    Ok(DefenseOutcome {
        selected_ids: ids(updates, &everyone(updates)),
        global,
        diagnostics: Diagnostics {
            delta_norms: Some(norms),
            ..Diagnostics::default()
        },
    })
}

/// Zeroes every channel whose energy exceeds `mean + u·std` (population std)
/// of its layer. Conv and Dense channels lose weights and bias; BatchNorm
/// channels lose `γ` and `β`. Returns the pruned model and how many channels
/// were cut.
pub fn prune_high_energy(model: &Model, u: f64, policy: LayerPolicy) -> (Model, usize) {
    let mut out = model.clone();
    let mut pruned = 0;
    for layer in out.layers_mut() {
        if !policy.admits(layer) {
            continue;
        }
        let Some((_, be)) = layer_be(layer) else {
            continue;
        };
        let n = be.len() as f64;
        let mean = be.iter().sum::<f64>() / n;
        let std = (be.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let threshold = mean + u * std;
        for (k, &v) in be.iter().enumerate() {
            if v <= threshold {
                continue;
            }
            pruned += 1;
            match layer {
                Layer::Dense(d) => {
                    d.weights[k * d.in_dim..(k + 1) * d.in_dim].fill(0.0);
                    d.bias[k] = 0.0;
                }
                Layer::Conv2d(c) => {
                    let len = c.filter_len();
                    c.filters[k * len..(k + 1) * len].fill(0.0);
                    c.bias[k] = 0.0;
                }
                Layer::BatchNorm(b) => {
                    b.gamma[k] = 0.0;
                    b.beta[k] = 0.0;
                }
                _ => {}
            }
        }
    }
    (out, pruned)
}

/// FedCLP: prune every update independently, then average all of them.
pub fn fed_clp(updates: &[LocalUpdate], u: f64, policy: LayerPolicy) -> Result<DefenseOutcome> {
    check_updates(updates)?;
    if !(u > 0.0) {
        return Err(Error::Config(format!("FedCLP threshold must be positive, got {u}")));
    }
    let results: Vec<(Model, usize)> = updates
        .par_iter()
        .map(|up| prune_high_energy(&up.model, u, policy))
        .collect();
    let pruned: Vec<usize> = results.iter().map(|r| r.1).collect();
    let pruned_updates: Vec<LocalUpdate> = updates
        .iter()
        .zip(results)
        .map(|(up, (model, _))| LocalUpdate {
            client_id: up.client_id,
            model,
        })
        .collect();
    let all = everyone(updates);
    Ok(DefenseOutcome {
        selected_ids: ids(updates, &all),
        global: average(&pruned_updates, &all)?,
        diagnostics: Diagnostics {
            pruned: Some(pruned),
            ..Diagnostics::default()
        },
    })
}
