//! The two reference architectures and their seeded initialization.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::layer::{BatchNorm, Conv2d, Dense, Layer};
use super::model::Model;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    /// Flatten, Dense(pixels→64), ReLU, Dense(64→c).
    #[serde(rename = "mlp-small")]
    MlpSmall,
    /// Two Conv3×3/BatchNorm/ReLU/AvgPool2 blocks (8 then 16 channels),
    /// Flatten, Dense(→c).
    #[serde(rename = "cnn-small")]
    CnnSmall,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::MlpSmall => "mlp-small",
            Architecture::CnnSmall => "cnn-small",
        })
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp-small" => Ok(Architecture::MlpSmall),
            "cnn-small" => Ok(Architecture::CnnSmall),
            other => Err(Error::Config(format!("unknown architecture '{other}'"))),
        }
    }
}

/// He-uniform weights, `U(±√(6/fan_in))`; biases start at zero.
fn he_uniform(rng: &mut Rng, fan_in: usize, len: usize) -> Vec<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..len).map(|_| rng.random_range(-bound..bound)).collect()
}

pub fn dense(rng: &mut Rng, in_dim: usize, out_dim: usize) -> Layer {
    Layer::Dense(
        Dense::new(
            in_dim,
            out_dim,
            he_uniform(rng, in_dim, in_dim * out_dim),
            vec![0.0; out_dim],
        )
        .expect("consistent by construction"),
    )
}

pub fn conv3x3(rng: &mut Rng, in_ch: usize, out_ch: usize) -> Layer {
    let fan_in = in_ch * 9;
    Layer::Conv2d(
        Conv2d::new(
            in_ch,
            out_ch,
            3,
            3,
            1,
            1,
            he_uniform(rng, fan_in, out_ch * fan_in),
            vec![0.0; out_ch],
        )
        .expect("consistent by construction"),
    )
}

impl Architecture {
    /// Builds a freshly initialized model for `[channels, height, width]`
    /// inputs.
    pub fn build(
        self,
        input: [usize; 3],
        num_classes: usize,
        rng: &mut Rng,
    ) -> Result<Model> {
        let [c, h, w] = input;
        let layers = match self {
            Architecture::MlpSmall => vec![
                Layer::Flatten,
                dense(rng, c * h * w, 64),
                Layer::Relu,
                dense(rng, 64, num_classes),
            ],
            Architecture::CnnSmall => {
                if h < 4 || w < 4 {
                    return Err(Error::Config(format!(
                        "cnn-small needs inputs of at least 4x4, got {h}x{w}"
                    )));
                }
                let flat = 16 * (h / 2 / 2) * (w / 2 / 2);
                vec![
                    conv3x3(rng, c, 8),
                    Layer::BatchNorm(BatchNorm::new(8)),
                    Layer::Relu,
                    Layer::AvgPool { window: 2 },
                    conv3x3(rng, 8, 16),
                    Layer::BatchNorm(BatchNorm::new(16)),
                    Layer::Relu,
                    Layer::AvgPool { window: 2 },
                    Layer::Flatten,
                    dense(rng, flat, num_classes),
                ]
            }
        };
        Model::new(vec![c, h, w], num_classes, layers)
    }
}
