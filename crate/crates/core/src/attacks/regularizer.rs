use crate::energy::{layer_be, spectral_norm, LayerPolicy};
use crate::error::Result;
use crate::nn::{Gradients, Layer, Model};

/// Sum of backdoor energy over every layer the policy admits, with its exact
/// gradient in trainable-parameter order.
///
/// * Dense row `w_k`: `w_k / ‖w_k‖₂` (zero for a zero row)
/// * Conv channel: `u vᵀ` of the reshaped filter's top singular pair
/// * BatchNorm channel: `sign(γ_k) / σ_k` on `γ_k`; running variance is a
///   buffer and gets no gradient
pub fn be_regularizer_grad(model: &Model, policy: LayerPolicy) -> Result<(Gradients, f64)> {
    let mut grad = Gradients::zeros(model.trainable_len());
    let mut total = 0.0;
    let offsets = model.trainable_offsets();
    for (layer, &at) in model.layers().iter().zip(&offsets) {
        if !policy.admits(layer) {
            continue;
        }
        if let Some((_, values)) = layer_be(layer) {
            total += values.iter().sum::<f64>();
        }
        let g = &mut grad.0;
        match layer {
            Layer::Dense(d) => {
                for k in 0..d.out_dim {
                    let row = d.row(k);
                    let n = row.iter().map(|w| w * w).sum::<f64>().sqrt();
                    if n > 0.0 {
                        let dst = &mut g[at + k * d.in_dim..at + (k + 1) * d.in_dim];
                        for (o, w) in dst.iter_mut().zip(row) {
                            *o = w / n;
                        }
                    }
                }
            }
            Layer::Conv2d(c) => {
                let cols = c.kernel_h * c.kernel_w;
                for k in 0..c.out_channels {
                    let t = spectral_norm(c.filter(k), c.in_channels, cols)?;
                    if t.sigma == 0.0 {
                        continue;
                    }
                    let base = at + k * c.filter_len();
                    for (i, ui) in t.u.iter().enumerate() {
                        for (j, vj) in t.v.iter().enumerate() {
                            g[base + i * cols + j] = ui * vj;
                        }
                    }
                }
            }
            Layer::BatchNorm(b) => {
                for k in 0..b.channels {
                    let s = if b.gamma[k] > 0.0 {
                        1.0
                    } else if b.gamma[k] < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    g[at + k] = s / b.sigma(k);
                }
            }
            _ => {}
        }
    }
    Ok((grad, total))
}
