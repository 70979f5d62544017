use serde::{Deserialize, Serialize};

use super::layer::{BnStats, Layer, Mode, ParamKind};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// An ordered stack of layers ending in `num_classes` logits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    input_shape: Vec<usize>,
    num_classes: usize,
    layers: Vec<Layer>,
}

/// Gradient of a scalar objective w.r.t. every trainable parameter, flattened
/// in [`Model::trainable_vector`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<f64>);

/// Every intermediate output of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    /// `activations[0]` is the input; `activations[i + 1]` is layer `i`'s output.
    pub activations: Vec<Tensor>,
    /// Training-mode batch statistics, one slot per layer.
    pub bn_stats: Vec<Option<BnStats>>,
    pub mode: Mode,
}

impl ForwardPass {
    pub fn logits(&self) -> &Tensor {
        self.activations.last().expect("a pass holds at least the input")
    }

    pub fn layer_output(&self, layer: usize) -> &Tensor {
        &self.activations[layer + 1]
    }
}

impl Gradients {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += scale * b;
        }
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Numerically stable softmax of one logit row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest logit; ties go to the lower class index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = k;
        }
    }
    best
}

impl Model {
    pub fn new(input_shape: Vec<usize>, num_classes: usize, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("a model needs at least one layer".into()));
        }
        let mut shape = input_shape.clone();
        for layer in &layers {
            if let Layer::BatchNorm(b) = layer {
                b.validate()?;
            }
            shape = layer.output_shape(&shape)?;
        }
        if shape != [num_classes] {
            return Err(Error::Shape(format!(
                "final layer produces {shape:?}, expected [{num_classes}] logits"
            )));
        }
        Ok(Self {
            input_shape,
            num_classes,
            layers,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access to the layer list. Callers must keep shapes intact;
    /// changing a layer's dimensions breaks the model's invariants.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    fn check_batch(&self, input: &Tensor) -> Result<()> {
        let shape = input.shape();
        if shape.is_empty() || shape[0] == 0 || shape[1..] != self.input_shape[..] {
            return Err(Error::Shape(format!(
                "expected a batch [N, {:?}], got {shape:?}",
                self.input_shape
            )));
        }
        Ok(())
    }

    /// Runs a batch `[N, ...input_shape]` through every layer.
    pub fn forward(&self, input: &Tensor, mode: Mode) -> Result<ForwardPass> {
        self.check_batch(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut bn_stats = Vec::with_capacity(self.layers.len());
        activations.push(input.clone());
        for layer in &self.layers {
            let (out, stats) = layer.forward(activations.last().unwrap(), mode)?;
            activations.push(out);
            bn_stats.push(stats);
        }
        Ok(ForwardPass {
            activations,
            bn_stats,
            mode,
        })
    }

    /// Inference-mode forward of a single sample shaped like `input_shape`.
    pub fn forward_one(&self, input: &Tensor) -> Result<ForwardPass> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(Error::Shape(format!(
                "expected a sample shaped {:?}, got {:?}",
                self.input_shape,
                input.shape()
            )));
        }
        self.forward(&input.clone().batched(), Mode::Eval)
    }

    pub fn predict(&self, batch: &Tensor) -> Result<Vec<usize>> {
        let pass = self.forward(batch, Mode::Eval)?;
        let logits = pass.logits();
        Ok((0..logits.shape()[0]).map(|i| argmax(logits.row(i))).collect())
    }

    /// Mean cross-entropy of the batch and its gradient w.r.t. every
    /// trainable parameter. The forward pass is returned so training-mode
    /// callers can fold its batch statistics into the running averages.
    pub fn backward_ce(
        &self,
        inputs: &Tensor,
        labels: &[usize],
        mode: Mode,
    ) -> Result<(f64, Gradients, ForwardPass)> {
        if labels.is_empty() || labels.len() != inputs.shape().first().copied().unwrap_or(0) {
            return Err(Error::InvalidBatch(format!(
                "{} labels for a batch of {:?}",
                labels.len(),
                inputs.shape()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.num_classes) {
            return Err(Error::InvalidBatch(format!(
                "label {bad} outside [0, {})",
                self.num_classes
            )));
        }
        let pass = self.forward(inputs, mode)?;
        let n = labels.len();
        let c = self.num_classes;
        let logits = pass.logits();
        let mut loss = 0.0;
        let mut grad = Tensor::zeros(vec![n, c]);
        for (i, &y) in labels.iter().enumerate() {
            let row = logits.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            loss += lse - row[y];
            let g = &mut grad.data_mut()[i * c..(i + 1) * c];
            for k in 0..c {
                g[k] = (row[k] - lse).exp() / n as f64;
            }
            g[y] -= 1.0 / n as f64;
        }
        loss /= n as f64;

        let mut per_layer: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (gx, pg) = layer.backward(
                &pass.activations[i],
                &grad,
                pass.bn_stats[i].as_ref(),
            );
            per_layer.push(pg);
            grad = gx;
        }
        per_layer.reverse();
        let flat = per_layer.into_iter().flatten().flatten().collect();
        Ok((loss, Gradients(flat), pass))
    }

    pub fn trainable_len(&self) -> usize {
        self.layers.iter().map(Layer::trainable_len).sum()
    }

    pub fn state_len(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .map(|(_, p)| p.len())
            .sum()
    }

    /// Offset of each layer's first trainable value in the trainable vector.
    pub fn trainable_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut at = 0;
        for layer in &self.layers {
            offsets.push(at);
            at += layer.trainable_len();
        }
        offsets
    }

    pub fn trainable_vector(&self) -> Vec<f64> {
        self.collect(|k| k == ParamKind::Trainable)
    }

    /// Every parameter and buffer, the full state that aggregation averages.
    pub fn state_vector(&self) -> Vec<f64> {
        self.collect(|_| true)
    }

    fn collect(&self, keep: impl Fn(ParamKind) -> bool) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for (kind, p) in layer.params() {
                if keep(kind) {
                    out.extend_from_slice(p);
                }
            }
        }
        out
    }

    pub fn set_state_vector(&mut self, values: &[f64]) -> Result<()> {
        self.assign(values, |_| true)
    }

    pub fn set_trainable_vector(&mut self, values: &[f64]) -> Result<()> {
        self.assign(values, |k| k == ParamKind::Trainable)
    }

    fn assign(&mut self, values: &[f64], keep: impl Fn(ParamKind) -> bool) -> Result<()> {
        let mut at = 0;
        for layer in &mut self.layers {
            for (kind, p) in layer.params_mut() {
                if keep(kind) {
                    let end = at + p.len();
                    let src = values.get(at..end).ok_or(Error::LengthMismatch {
                        left: values.len(),
                        right: end,
                    })?;
                    p.copy_from_slice(src);
                    at = end;
                }
            }
        }
        if at != values.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: at,
            });
        }
        Ok(())
    }

    /// `θ ← θ − lr·grad` on every trainable parameter.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.0.len() != self.trainable_len() {
            return Err(Error::LengthMismatch {
                left: grads.0.len(),
                right: self.trainable_len(),
            });
        }
        let mut at = 0;
        for layer in &mut self.layers {
            for (kind, p) in layer.params_mut() {
                if kind != ParamKind::Trainable {
                    continue;
                }
                let len = p.len();
                for (w, g) in p.iter_mut().zip(&grads.0[at..at + len]) {
                    *w -= lr * g;
                }
                at += len;
            }
        }
        Ok(())
    }

    /// Folds a training-mode pass's batch statistics into BatchNorm running
    /// averages (`momentum` weight on the new batch, unbiased variance).
    pub fn update_running_stats(&mut self, pass: &ForwardPass) {
        for (layer, stats) in self.layers.iter_mut().zip(&pass.bn_stats) {
            if let (Layer::BatchNorm(b), Some(s)) = (layer, stats) {
                let correction = if s.count > 1 {
                    s.count as f64 / (s.count - 1) as f64
                } else {
                    1.0
                };
                for ch in 0..b.channels {
                    b.running_mean[ch] =
                        (1.0 - b.momentum) * b.running_mean[ch] + b.momentum * s.mean[ch];
                    b.running_var[ch] = (1.0 - b.momentum) * b.running_var[ch]
                        + b.momentum * s.var[ch] * correction;
                }
            }
        }
    }

    /// True when every parameter and buffer is finite and every BatchNorm
    /// variance is nonnegative.
    pub fn is_well_formed(&self) -> bool {
        self.state_vector().iter().all(|v| v.is_finite())
            && self.layers.iter().all(|l| match l {
                Layer::BatchNorm(b) => b.validate().is_ok(),
                _ => true,
            })
    }
}
