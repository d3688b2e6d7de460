//! Tensors, reverse-mode autodiff, a counter-based RNG and the Adam optimizer.

mod adam;
mod conv;
pub mod gradcheck;
mod params;
mod rng;
mod tape;
mod tensor;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use params::ParamSet;
pub use rng::{randn, Rng};
pub use tape::{Binding, Gradients, Tape, Var};
pub use tensor::Tensor;
