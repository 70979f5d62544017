use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::layer::Mode;
use super::model::{Gradients, Model};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Local SGD schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!(
                "training needs batch_size > 0 and a positive finite lr, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Mini-batch SGD over `data` in training mode. Before each step `adjust`
/// may rewrite the cross-entropy gradient (add a regularizer, mask frozen
/// parameters). Returns the mean loss of every epoch.
pub fn train(
    model: &mut Model,
    data: &Dataset,
    cfg: &TrainConfig,
    rng: &mut Rng,
    mut adjust: impl FnMut(&Model, &mut Gradients),
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    if data.is_empty() {
        return Ok(epoch_losses);
    }
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.batch(chunk);
            let labels = data.batch_labels(chunk);
            let (loss, mut grads, pass) = model.backward_ce(&batch, &labels, Mode::Train)?;
            adjust(model, &mut grads);
            model.update_running_stats(&pass);
            model.sgd_step(&grads, cfg.lr)?;
            total += loss * chunk.len() as f64;
        }
        epoch_losses.push(total / data.len() as f64);
    }
    Ok(epoch_losses)
}

/// Fraction of samples whose argmax prediction equals the label.
pub fn evaluate(model: &Model, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty dataset".into()));
    }
    let indices: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0usize;
    for chunk in indices.chunks(256) {
        let preds = model.predict(&data.batch(chunk))?;
        correct += preds
            .iter()
            .zip(chunk)
            .filter(|(p, &i)| **p == data.label(i))
            .count();
    }
    Ok(correct as f64 / data.len() as f64)
}
