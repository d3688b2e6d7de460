//! DDPM: noise schedule, epsilon-prediction network and training, ancestral
//! sampling, and the mask-projected inpainting baseline.

mod epsnet;
mod sample;
mod schedule;
mod train;

pub(crate) use sample::noise_batch;

pub use epsnet::EpsilonNet;
pub use sample::{ancestral_sample, ancestral_sample_batch, ddpm_inpaint_baseline, ddpm_inpaint_batch};
pub use schedule::{q_sample, q_sample_batch, NoiseSchedule};
pub use train::{ddpm_train_step, images_to_batch, train_ddpm, DdpmTrainConfig};
