//! Data-dependent energy: the measured clean/trigger activation gap and the
//! Lipschitz-product bound that caps it on Dense+ReLU networks.

use rand::Rng as _;

use super::profile::{layer_be, BeProfile, LayerEnergy, LayerKind};
use super::spectral::spectral_norm;
use crate::data::{triggered_copy, Dataset, TriggerSpec};
use crate::error::{Error, Result};
use crate::nn::{Layer, Mode, Model};
use crate::rng::{rng_at, stream};

/// `count` dataset indices drawn uniformly with replacement.
pub fn probe_indices(len: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count == 0 || len == 0 {
        return Err(Error::InvalidArgument(
            "probing needs a nonempty dataset and sample_count >= 1".into(),
        ));
    }
    let mut rng = rng_at(seed, &[stream::PROBE]);
    Ok((0..count).map(|_| rng.random_range(0..len)).collect())
}

/// Mean over probe samples of `‖F_k(x) − F_k(δ(x))‖₂` for every neuron of
/// every Dense, Conv and BatchNorm layer (absolute difference for Dense
/// neurons, L2 over the flattened map for channels). Inference mode.
pub fn empirical_be(
    model: &Model,
    data: &Dataset,
    trigger: &TriggerSpec,
    sample_count: usize,
    seed: u64,
) -> Result<BeProfile> {
    let idx = probe_indices(data.len(), sample_count, seed)?;
    let triggered = triggered_copy(data, trigger);
    let clean = model.forward(&data.batch(&idx), Mode::Eval)?;
    let poisoned = model.forward(&triggered.batch(&idx), Mode::Eval)?;
    let n = idx.len() as f64;

    let mut layers = Vec::new();
    for (li, layer) in model.layers().iter().enumerate() {
        let kind = match layer {
            Layer::Dense(_) => LayerKind::Dense,
            Layer::Conv2d(_) => LayerKind::Conv2d,
            Layer::BatchNorm(_) => LayerKind::BatchNorm,
            _ => continue,
        };
        let a = clean.layer_output(li);
        let b = poisoned.layer_output(li);
        let units = a.shape()[1];
        let per_unit: usize = a.shape()[2..].iter().product();
        let mut values = vec![0.0; units];
        for s in 0..idx.len() {
            let (ra, rb) = (a.row(s), b.row(s));
            for (k, v) in values.iter_mut().enumerate() {
                let span = k * per_unit..(k + 1) * per_unit;
                let sq: f64 = ra[span.clone()]
                    .iter()
                    .zip(&rb[span])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                *v += sq.sqrt();
            }
        }
        values.iter_mut().for_each(|v| *v /= n);
        layers.push(LayerEnergy {
            layer_index: li,
            kind,
            values,
        });
    }
    Ok(BeProfile { layers })
}

/// Upper bound on [`empirical_be`] for networks built from Dense, ReLU and
/// Flatten layers: neuron `k` of layer `l` is bounded by
/// `‖f_k‖ · Π_{i<l} ‖f^(i)‖ · mean ‖x − δ(x)‖₂`, with a Dense layer's full
/// Lipschitz constant taken as the spectral norm of its weights and ReLU and
/// Flatten contributing 1. Uses the same probe samples as `empirical_be` for
/// equal `(sample_count, seed)`.
pub fn be_upper_bound(
    model: &Model,
    data: &Dataset,
    trigger: &TriggerSpec,
    sample_count: usize,
    seed: u64,
) -> Result<BeProfile> {
    for layer in model.layers() {
        if !matches!(layer, Layer::Dense(_) | Layer::Relu | Layer::Flatten) {
            return Err(Error::UnsupportedLayer(format!(
                "{} has no exact Lipschitz constant here",
                layer.kind_name()
            )));
        }
    }
    let idx = probe_indices(data.len(), sample_count, seed)?;
    let dims = [data.height(), data.width(), data.channels()];
    let mut input_gap = 0.0;
    let mut stamped = vec![0.0; data.image_len()];
    for &i in &idx {
        stamped.copy_from_slice(data.image(i));
        trigger.stamp(&mut stamped, dims[0], dims[1], dims[2]);
        input_gap += data
            .image(i)
            .iter()
            .zip(&stamped)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
    }
    input_gap /= idx.len() as f64;

    let mut prefix = 1.0;
    let mut layers = Vec::new();
    for (li, layer) in model.layers().iter().enumerate() {
        if let Layer::Dense(d) = layer {
            let (_, rows) = layer_be(layer).expect("dense layers are analyzable");
            layers.push(LayerEnergy {
                layer_index: li,
                kind: LayerKind::Dense,
                values: rows.iter().map(|r| r * prefix * input_gap).collect(),
            });
            prefix *= spectral_norm(&d.weights, d.out_dim, d.in_dim)?.sigma;
        }
    }
    Ok(BeProfile { layers })
}
