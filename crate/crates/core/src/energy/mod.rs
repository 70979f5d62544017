//! Backdoor energy: per-neuron Lipschitz scores computed from parameters,
//! their measured counterpart, the product bound linking the two, and the
//! concentrated top-κ% summary used for clustering.

mod empirical;
mod profile;
mod spectral;

pub use empirical::{be_upper_bound, empirical_be, probe_indices};
pub use profile::{
    cbe, layer_be, model_be, top_count, BeProfile, CbeVector, LayerEnergy, LayerKind, LayerPolicy,
};
pub use spectral::{spectral_norm, SingularTriplet, MAX_ITERATIONS, SQUARINGS, TOLERANCE};
