use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::TriggerSpec;
use crate::energy::LayerPolicy;
use crate::error::{Error, Result};
use crate::nn::{Layer, Model};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    #[default]
    None,
    /// Trigger poisoning followed by model-replacement scaling.
    Mra,
    /// Trigger poisoning with a backdoor-energy penalty in the loss.
    AdaptiveBe,
    /// Every label `k` becomes `(k + 1) mod c`.
    LabelFlip,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::Mra => "mra",
            AttackKind::AdaptiveBe => "adaptive_be",
            AttackKind::LabelFlip => "label_flip",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AttackKind::None),
            "mra" => Ok(AttackKind::Mra),
            "adaptive_be" => Ok(AttackKind::AdaptiveBe),
            "label_flip" => Ok(AttackKind::LabelFlip),
            other => Err(Error::Config(format!("unknown attack '{other}'"))),
        }
    }
}

/// MRA boost factor: a fixed value, or `"auto"` for
/// clients-per-round / attackers-per-round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScaleRepr", into = "ScaleRepr")]
pub enum ScaleFactor {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ScaleRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<ScaleRepr> for ScaleFactor {
    type Error = String;

    fn try_from(r: ScaleRepr) -> std::result::Result<Self, String> {
        match r {
            ScaleRepr::Number(v) => Ok(ScaleFactor::Fixed(v)),
            ScaleRepr::Text(s) if s == "auto" => Ok(ScaleFactor::Auto),
            ScaleRepr::Text(s) => Err(format!("scale_factor must be a number or \"auto\", got {s:?}")),
        }
    }
}

impl From<ScaleFactor> for ScaleRepr {
    fn from(s: ScaleFactor) -> Self {
        match s {
            ScaleFactor::Auto => ScaleRepr::Text("auto".into()),
            ScaleFactor::Fixed(v) => ScaleRepr::Number(v),
        }
    }
}

impl ScaleFactor {
    pub fn resolve(self, round: &RoundShape) -> f64 {
        match self {
            ScaleFactor::Fixed(v) => v,
            ScaleFactor::Auto => round.clients as f64 / round.attackers.max(1) as f64,
        }
    }
}

/// Participation counts of the current round, as the attackers see them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundShape {
    pub clients: usize,
    pub attackers: usize,
}

/// Which layers an attacker modifies. A "conv block" is a Conv2d layer plus
/// the BatchNorm directly after it, if any.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackedLayers {
    #[default]
    All,
    FcOnly,
    FirstKConvsPlusFc(usize),
}

impl AttackedLayers {
    /// Per-layer flag: may the attacker change this layer?
    pub fn mask(self, model: &Model) -> Vec<bool> {
        let layers = model.layers();
        let mut mask = vec![false; layers.len()];
        let mut convs_seen = 0;
        for (i, layer) in layers.iter().enumerate() {
            mask[i] = match (self, layer) {
                (AttackedLayers::All, _) => true,
                (_, Layer::Dense(_)) => true,
                (AttackedLayers::FirstKConvsPlusFc(k), Layer::Conv2d(_)) => {
                    convs_seen += 1;
                    convs_seen <= k
                }
                (AttackedLayers::FirstKConvsPlusFc(_), Layer::BatchNorm(_)) => {
                    i > 0 && matches!(layers[i - 1], Layer::Conv2d(_)) && mask[i - 1]
                }
                _ => false,
            };
        }
        mask
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub trigger: TriggerSpec,
    pub poison_fraction: f64,
    pub scale_factor: ScaleFactor,
    pub lambda: f64,
    pub attacked_layers: AttackedLayers,
    /// Layers whose energy the adaptive attack penalizes.
    pub regularized_layers: LayerPolicy,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            kind: AttackKind::None,
            trigger: TriggerSpec::default(),
            poison_fraction: 0.5,
            scale_factor: ScaleFactor::Auto,
            lambda: 0.0,
            attacked_layers: AttackedLayers::All,
            regularized_layers: LayerPolicy::AllLayers,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.poison_fraction) {
            return Err(Error::Config(format!(
                "poison_fraction {} outside [0, 1]",
                self.poison_fraction
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.lambda != 0.0 && self.kind != AttackKind::AdaptiveBe {
            return Err(Error::Config(format!(
                "lambda = {} is only meaningful for adaptive_be, attack is {}",
                self.lambda, self.kind
            )));
        }
        if let ScaleFactor::Fixed(v) = self.scale_factor {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("scale_factor must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;
    use crate::rng::rng_from;

    #[test]
    fn scale_factor_serde() {
        let auto: ScaleFactor = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(auto, ScaleFactor::Auto);
        let fixed: ScaleFactor = serde_json::from_str("2.5").unwrap();
        assert_eq!(fixed, ScaleFactor::Fixed(2.5));
        assert!(serde_json::from_str::<ScaleFactor>("\"big\"").is_err());
        assert_eq!(serde_json::to_string(&ScaleFactor::Auto).unwrap(), "\"auto\"");
        let shape = RoundShape { clients: 20, attackers: 4 };
        assert_eq!(ScaleFactor::Auto.resolve(&shape), 5.0);
    }

    #[test]
    fn layer_masks_on_cnn_small() {
        // conv, bn, relu, pool, conv, bn, relu, pool, flatten, dense
        let m = Architecture::CnnSmall.build([1, 16, 16], 10, &mut rng_from(0)).unwrap();
        let t = true;
        let f = false;
        assert_eq!(AttackedLayers::All.mask(&m), vec![t; 10]);
        assert_eq!(AttackedLayers::FcOnly.mask(&m), vec![f, f, f, f, f, f, f, f, f, t]);
        assert_eq!(
            AttackedLayers::FirstKConvsPlusFc(1).mask(&m),
            vec![t, t, f, f, f, f, f, f, f, t]
        );
        let parsed: AttackedLayers =
            serde_json::from_str(r#"{"first_k_convs_plus_fc": 1}"#).unwrap();
        assert_eq!(parsed, AttackedLayers::FirstKConvsPlusFc(1));
    }

    #[test]
    fn lambda_requires_adaptive_attack() {
        let mut cfg = AttackConfig {
            kind: AttackKind::Mra,
            lambda: 0.1,
            ..AttackConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.kind = AttackKind::AdaptiveBe;
        assert!(cfg.validate().is_ok());
        cfg.lambda = -1.0;
        assert!(cfg.validate().is_err());
    }
}
