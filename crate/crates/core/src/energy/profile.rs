use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::spectral::spectral_norm;
use crate::error::{Error, Result};
use crate::nn::{Conv2d, Layer, Model};

/// Which parametric layers receive energy scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerPolicy {
    /// Convolution and BatchNorm layers only; fully connected layers are
    /// skipped.
    #[default]
    ConvBnOnly,
    AllLayers,
}

impl LayerPolicy {
    pub fn admits(self, layer: &Layer) -> bool {
        match (self, layer) {
            (_, Layer::Conv2d(_) | Layer::BatchNorm(_)) => true,
            (LayerPolicy::AllLayers, Layer::Dense(_)) => true,
            _ => false,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerPolicy::ConvBnOnly => "conv_bn_only",
            LayerPolicy::AllLayers => "all_layers",
        }
    }
}

impl fmt::Display for LayerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conv_bn_only" => Ok(LayerPolicy::ConvBnOnly),
            "all_layers" => Ok(LayerPolicy::AllLayers),
            other => Err(Error::Config(format!("unknown layer policy '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    Conv2d,
    BatchNorm,
}

/// Energy of every neuron (Dense) or channel (Conv, BatchNorm) of one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerEnergy {
    /// Position of the layer in the model.
    pub layer_index: usize,
    pub kind: LayerKind,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeProfile {
    pub layers: Vec<LayerEnergy>,
}

impl BeProfile {
    pub fn total(&self) -> f64 {
        self.layers.iter().flat_map(|l| &l.values).sum()
    }

    pub fn values(&self) -> Vec<&[f64]> {
        self.layers.iter().map(|l| l.values.as_slice()).collect()
    }
}

/// The `(in_channels) × (kh·kw)` matrix of output channel `k`.
fn conv_channel_matrix(c: &Conv2d, k: usize) -> (&[f64], usize, usize) {
    (c.filter(k), c.in_channels, c.kernel_h * c.kernel_w)
}

/// Lipschitz constant of each neuron's sub-function, from parameters alone:
///
/// * Dense neuron `k`: `‖row_k‖₂`
/// * Conv channel `k`: spectral norm of its filter reshaped to
///   `(in_channels) × (kh·kw)`
/// * BatchNorm channel `k`: `|γ_k| / √(running_var_k + eps)`
///
/// Returns `None` for layers without parameters.
pub fn layer_be(layer: &Layer) -> Option<(LayerKind, Vec<f64>)> {
    match layer {
        Layer::Dense(d) => Some((
            LayerKind::Dense,
            (0..d.out_dim)
                .map(|k| d.row(k).iter().map(|w| w * w).sum::<f64>().sqrt())
                .collect(),
        )),
        Layer::Conv2d(c) => Some((
            LayerKind::Conv2d,
            (0..c.out_channels)
                .map(|k| {
                    let (m, r, cols) = conv_channel_matrix(c, k);
                    spectral_norm(m, r, cols).map_or(0.0, |t| t.sigma)
                })
                .collect(),
        )),
        Layer::BatchNorm(b) => Some((
            LayerKind::BatchNorm,
            (0..b.channels).map(|k| b.gamma[k].abs() / b.sigma(k)).collect(),
        )),
        _ => None,
    }
}

/// Energy profile over every layer the policy admits, in model order.
pub fn model_be(model: &Model, policy: LayerPolicy) -> Result<BeProfile> {
    let layers: Vec<LayerEnergy> = model
        .layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| policy.admits(l))
        .filter_map(|(i, l)| {
            layer_be(l).map(|(kind, values)| LayerEnergy {
                layer_index: i,
                kind,
                values,
            })
        })
        .collect();
    if layers.is_empty() {
        return Err(Error::NoAnalyzableLayers(policy.name()));
    }
    Ok(BeProfile { layers })
}

/// Per-layer top-κ% energies, each layer sorted descending, concatenated in
/// layer order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbeVector {
    pub values: Vec<f64>,
    pub kappa: f64,
}

/// `max(1, ⌈κ/100 · n⌉)`, the number of values a layer of `n` contributes.
pub fn top_count(n: usize, kappa: f64) -> usize {
    let exact = kappa * n as f64 / 100.0;
    // Absorb rounding noise so e.g. 10% of 10 stays exactly 1.
    let k = (exact - 1e-9).ceil().max(1.0) as usize;
    k.min(n)
}

pub fn cbe(profile: &BeProfile, kappa: f64) -> Result<CbeVector> {
    if !(kappa > 0.0 && kappa <= 100.0) {
        return Err(Error::InvalidArgument(format!(
            "kappa must lie in (0, 100], got {kappa}"
        )));
    }
    let mut values = Vec::new();
    for layer in &profile.layers {
        let mut sorted = layer.values.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        sorted.truncate(top_count(sorted.len(), kappa));
        values.extend(sorted);
    }
    Ok(CbeVector { values, kappa })
}
