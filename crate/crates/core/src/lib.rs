//! Image inpainting by running a conditional GAN generator inside a
//! diffusion-style denoising loop, with a DDPM inpainting baseline, the
//! training code for both, and the evaluation tooling around them.

pub mod data;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod gan;
mod nn;
pub mod numerics;
pub mod sampler;
mod trace;

pub use error::{Error, Result};
pub use trace::SampleTrace;
