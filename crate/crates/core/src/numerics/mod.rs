//! Dense tensors, reverse-mode differentiation, and optimization.

pub mod checkpoint;
pub mod gradcheck;
pub mod kernels;
pub mod optim;
pub mod params;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use optim::{lr_schedule, Adam, OptimizerConfig};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{Mode, Tape, Var};
pub use tensor::Tensor;
