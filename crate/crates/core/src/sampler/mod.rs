//! Generator-driven denoising loop and the composited inpainting built on it.
//!
//! The loop draws one conditioning noise tensor `n0`, then for `T` steps
//! injects Gaussian noise, evaluates the drift model on `(state, n0)`, and
//! moves the state by the model's drift scaled by `sqrt(1/T)`. Two step rules
//! are available:
//!
//! * [`SamplerMode::Verbatim`]: noise scale `sqrt(2)` and drift `out`. State
//!   variance grows like `2T`, so with a trained generator the state leaves
//!   the range the network has seen.
//! * [`SamplerMode::Stabilized`] (default): noise scale `sqrt(2/T)` and drift
//!   `out - state`, a relaxation toward the model's image estimate with
//!   bounded variance.

mod paint;

use std::fmt;
use std::str::FromStr;

use crate::diffusion::{EpsilonNet, NoiseSchedule};
use crate::error::{Error, Result};
use crate::gan::Generator;
use crate::numerics::Tensor;

pub use paint::{denoise_diffusion, denoise_diffusion_batch, diffganpaint_inpaint, diffganpaint_inpaint_batch};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SamplerMode {
    Verbatim,
    #[default]
    Stabilized,
}

/// Which network the loop evaluates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DriftRole {
    #[default]
    Generator,
    EpsilonNet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub timesteps: usize,
    pub mode: SamplerMode,
    pub drift_model: DriftRole,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            timesteps: 100,
            mode: SamplerMode::default(),
            drift_model: DriftRole::default(),
            seed: 0,
        }
    }
}

macro_rules! named_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self {
                    $($ty::$variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(Error::invalid(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"),
                        s
                    ))),
                }
            }
        }
    };
}

named_enum!(SamplerMode { Verbatim => "verbatim", Stabilized => "stabilized" });
named_enum!(DriftRole { Generator => "generator", EpsilonNet => "epsilon_net" });

/// A network evaluated inside the denoising loop.
///
/// `step` runs from 1 to `steps`. The default drift is the generator rule for
/// the given mode.
pub trait DriftModel {
    fn role(&self) -> DriftRole;

    /// Batched model output for `state` and the fixed conditioning `noise`.
    fn predict(&self, state: &Tensor, noise: &Tensor, step: usize, steps: usize) -> Result<Tensor>;

    fn drift(&self, out: Tensor, state: &Tensor, mode: SamplerMode, _step: usize, _steps: usize) -> Result<Tensor> {
        match mode {
            SamplerMode::Verbatim => Ok(out),
            SamplerMode::Stabilized => out.zip_map(state, |o, x| o - x),
        }
    }
}

impl DriftModel for Generator {
    fn role(&self) -> DriftRole {
        DriftRole::Generator
    }

    fn predict(&self, state: &Tensor, noise: &Tensor, _step: usize, _steps: usize) -> Result<Tensor> {
        self.generate(state, noise)
    }
}

/// Epsilon-net wiring of the loop: loop step `i` is mapped onto diffusion time
/// `t = ceil((T - i + 1) / T * S)` of a schedule with `S` steps, the network
/// sees the state and `t / S` (the conditioning noise is unused), and the drift
/// is `-eps * sqrt(1 - alpha_bar[t])`, i.e. the noise the network attributes
/// to the state, removed at that level's scale.
pub struct EpsilonDrift<'a> {
    pub net: &'a EpsilonNet,
    pub schedule: &'a NoiseSchedule,
}

impl EpsilonDrift<'_> {
    fn diffusion_time(&self, step: usize, steps: usize) -> usize {
        let s = self.schedule.steps();
        ((steps - step + 1) * s).div_ceil(steps).clamp(1, s)
    }
}

impl DriftModel for EpsilonDrift<'_> {
    fn role(&self) -> DriftRole {
        DriftRole::EpsilonNet
    }

    fn predict(&self, state: &Tensor, _noise: &Tensor, step: usize, steps: usize) -> Result<Tensor> {
        let t = self.diffusion_time(step, steps);
        let n = state.dims4()?.0;
        let frac = vec![t as f32 / self.schedule.steps() as f32; n];
        self.net.predict(state, &frac)
    }

    fn drift(&self, out: Tensor, _state: &Tensor, _mode: SamplerMode, step: usize, steps: usize) -> Result<Tensor> {
        let ab = self.schedule.alpha_bar(self.diffusion_time(step, steps))?;
        let k = (1.0 - ab).sqrt() as f32;
        Ok(out.map(|e| -e * k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn enum_names_round_trip() {
        for m in [SamplerMode::Verbatim, SamplerMode::Stabilized] {
            assert_eq!(m.name().parse::<SamplerMode>().unwrap(), m);
        }
        for r in [DriftRole::Generator, DriftRole::EpsilonNet] {
            assert_eq!(r.to_string().parse::<DriftRole>().unwrap(), r);
        }
        assert!("fast".parse::<SamplerMode>().is_err());
    }

    #[test]
    fn epsilon_time_mapping_spans_the_schedule() {
        let net = EpsilonNet::new(1, &Rng::new(0)).unwrap();
        let schedule = NoiseSchedule::default();
        let e = EpsilonDrift { net: &net, schedule: &schedule };
        assert_eq!(e.diffusion_time(1, 100), 200);
        assert_eq!(e.diffusion_time(100, 100), 2);
        assert_eq!(e.diffusion_time(1, 1), 200);
        assert_eq!(e.diffusion_time(3, 3), 67);
    }
}
