//! Conditional generator and patch discriminator, trained adversarially with
//! an L1 reconstruction term to map noisy masked images back to clean ones.

mod nets;
mod train;

pub use nets::{generator_forward, Discriminator, Generator};
pub use train::{gan_train_step, reconstruction_l1, train_gan, GanLosses, GanOptimizers, GanTrainConfig};
