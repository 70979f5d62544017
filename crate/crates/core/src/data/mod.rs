//! Datasets, IDX ingestion, synthetic data, Dirichlet client splits and
//! backdoor triggers.

mod dataset;
mod idx;
mod partition;
mod synth;
mod trigger;

pub use dataset::Dataset;
pub use idx::{load_idx, IMAGES_MAGIC, LABELS_MAGIC};
pub use partition::{dirichlet_partition, PartitionPlan};
pub use synth::synth_dataset;
pub use trigger::{apply_trigger, poison_dataset, triggered_copy, Anchor, TriggerSpec};
