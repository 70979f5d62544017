//! Backdoor-energy defenses for federated learning.
//!
//! Models are scored neuron by neuron with Lipschitz-based backdoor energy,
//! summarized into concentrated (top-κ%) vectors, and split into two
//! clusters under the Wasserstein-1 distance; the low-energy cluster is
//! aggregated. Around that core sit a small training engine, datasets and
//! triggers, attacks, baseline aggregators and an experiment harness.

pub mod attacks;
pub mod cluster;
pub mod data;
pub mod defenses;
pub mod energy;
mod error;
pub mod harness;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/backdoor-energy.md")]
    pub mod backdoor_energy {}
    #[doc = include_str!("../../../book/src/wasserstein-clustering.md")]
    pub mod wasserstein_clustering {}
    #[doc = include_str!("../../../book/src/attacks.md")]
    pub mod attacks {}
    #[doc = include_str!("../../../book/src/defenses.md")]
    pub mod defenses {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
    #[doc = include_str!("../../../book/src/determinism.md")]
    pub mod determinism {}
    #[doc = include_str!("../../../book/src/results.md")]
    pub mod results {}
}
