//! Malicious client behaviors: trigger poisoning with model-replacement
//! scaling, label flipping, partial-layer backdoors and the energy-penalized
//! adaptive attack.

mod config;
mod local;
mod regularizer;

pub use config::{AttackConfig, AttackKind, AttackedLayers, RoundShape, ScaleFactor};
pub use local::{attacker_local_train, flip_labels, honest_local_train};
pub use regularizer::be_regularizer_grad;
