//! A small deterministic `f64` network engine: forward, exact backward for
//! cross-entropy, and plain SGD over Dense, Conv2d, BatchNorm, ReLU, AvgPool
//! and Flatten layers.

mod arch;
mod layer;
mod model;
mod tensor;
mod train;

pub use arch::{conv3x3, dense, Architecture};
pub use layer::{BatchNorm, BnStats, Conv2d, Dense, Layer, Mode, ParamKind};
pub use model::{argmax, softmax, ForwardPass, Gradients, Model};
pub use tensor::Tensor;
pub use train::{evaluate, train, TrainConfig};
