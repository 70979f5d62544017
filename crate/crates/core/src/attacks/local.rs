use super::config::{AttackConfig, AttackKind, RoundShape};
use super::regularizer::be_regularizer_grad;
use crate::data::{poison_dataset, Dataset};
use crate::error::{Error, Result};
use crate::nn::{train, Gradients, Model, TrainConfig};
use crate::rng::{derive, rng_at, stream};

/// Plain local SGD from `global` on `data`, shuffling with the client's
/// training stream.
pub fn honest_local_train(
    global: &Model,
    data: &Dataset,
    hyper: &TrainConfig,
    seed: u64,
) -> Result<Model> {
    let mut local = global.clone();
    train(&mut local, data, hyper, &mut rng_at(seed, &[stream::TRAIN]), |_, _| {})?;
    Ok(local)
}

/// `k ↦ (k + 1) mod c` on every label.
pub fn flip_labels(data: &Dataset) -> Dataset {
    let mut out = data.clone();
    let c = data.num_classes();
    for l in out.labels_mut() {
        *l = (*l + 1) % c;
    }
    out
}

/// One malicious client's local round, starting from `global`. `seed` is the
/// client's own seed; it drives both poisoning and shuffling.
///
/// Layers outside `cfg.attacked_layers` get no gradient and are restored to
/// their global values (including BatchNorm buffers) before scaling.
pub fn attacker_local_train(
    global: &Model,
    local_data: &Dataset,
    cfg: &AttackConfig,
    hyper: &TrainConfig,
    round: &RoundShape,
    seed: u64,
) -> Result<Model> {
    cfg.validate()?;
    let data = match cfg.kind {
        AttackKind::None => {
            return Err(Error::InvalidArgument("attack kind is none".into()));
        }
        AttackKind::Mra | AttackKind::AdaptiveBe => poison_dataset(
            local_data,
            &cfg.trigger,
            cfg.poison_fraction,
            derive(seed, &[stream::POISON]),
        )?,
        AttackKind::LabelFlip => flip_labels(local_data),
    };

    let layer_mask = cfg.attacked_layers.mask(global);
    let offsets = global.trainable_offsets();
    let mut frozen: Vec<std::ops::Range<usize>> = Vec::new();
    for (i, layer) in global.layers().iter().enumerate() {
        if !layer_mask[i] {
            frozen.push(offsets[i]..offsets[i] + layer.trainable_len());
        }
    }
    let lambda = if cfg.kind == AttackKind::AdaptiveBe { cfg.lambda } else { 0.0 };
    let policy = cfg.regularized_layers;
    let mut reg_error = None;

    let mut local = global.clone();
    train(
        &mut local,
        &data,
        hyper,
        &mut rng_at(seed, &[stream::TRAIN]),
        |model: &Model, grads: &mut Gradients| {
            if lambda > 0.0 {
                match be_regularizer_grad(model, policy) {
                    Ok((g, _)) => grads.add_scaled(&g, lambda),
                    Err(e) => reg_error = Some(e),
                }
            }
            for r in &frozen {
                grads.0[r.clone()].fill(0.0);
            }
        },
    )?;
    if let Some(e) = reg_error {
        return Err(e);
    }

    for (i, keep) in layer_mask.iter().enumerate() {
        if !keep {
            local.layers_mut()[i] = global.layers()[i].clone();
        }
    }

    let gamma = cfg.scale_factor.resolve(round);
    if cfg.kind == AttackKind::Mra && gamma != 1.0 {
        let g = global.trainable_vector();
        let t = local.trainable_vector();
        let scaled: Vec<f64> = g.iter().zip(&t).map(|(a, b)| a + gamma * (b - a)).collect();
        local.set_trainable_vector(&scaled)?;
    }
    Ok(local)
}
