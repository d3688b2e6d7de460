//! Convolution layer bookkeeping shared by the networks.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::Result;
use crate::numerics::{Binding, ParamSet, Rng, Tape, Tensor, Var};

pub(crate) const LEAKY_SLOPE: f32 = 0.2;

/// Indices of a conv layer's weight and bias inside its network's [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvLayer {
    weight: usize,
    bias: usize,
    stride: usize,
    pad: usize,
}

/// Weight std is `gain / sqrt(fan_in)`; biases start at zero.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_layer(
    params: &mut ParamSet,
    rng: &mut Rng,
    name: &str,
    cin: usize,
    cout: usize,
    k: usize,
    stride: usize,
    gain: f32,
) -> Result<ConvLayer> {
    let fan_in = (cin * k * k) as f32;
    let mut w = vec![0.0; cout * cin * k * k];
    rng.split(name).fill_normal(&mut w);
    let std = gain / fan_in.sqrt();
    w.iter_mut().for_each(|v| *v *= std);
    let weight = params.push(format!("{name}.weight"), Tensor::new(vec![cout, cin, k, k], w)?)?;
    let bias = params.push(format!("{name}.bias"), Tensor::zeros(&[cout])?)?;
    Ok(ConvLayer {
        weight,
        bias,
        stride,
        pad: k / 2,
    })
}

/// He-style gain for leaky ReLU.
pub(crate) fn leaky_gain() -> f32 {
    (2.0 / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE)).sqrt()
}

impl ConvLayer {
    pub fn apply(&self, tape: &mut Tape, p: &Binding, x: Var) -> Result<Var> {
        tape.conv2d(x, p.var(self.weight), p.var(self.bias), self.stride, self.pad)
    }

    pub fn apply_act(&self, tape: &mut Tape, p: &Binding, x: Var) -> Result<Var> {
        let y = self.apply(tape, p, x)?;
        tape.leaky_relu(y, LEAKY_SLOPE)
    }
}

/// Pooled whole-image summary, projected and broadcast back over the feature
/// map: `x + act(conv1x1(mean_spatial(x)))`.
pub(crate) fn add_global_context(tape: &mut Tape, p: &Binding, proj: &ConvLayer, x: Var) -> Result<Var> {
    let pooled = tape.mean_spatial(x)?;
    let g = proj.apply_act(tape, p, pooled)?;
    tape.add_spatial(x, g)
}

/// Forward-pass counter, one tick per sample per pass.
#[derive(Debug, Default)]
pub(crate) struct EvalCounter(AtomicU64);

impl EvalCounter {
    pub fn add(&self, n: usize) {
        self.0.fetch_add(n as u64, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

impl Clone for EvalCounter {
    fn clone(&self) -> Self {
        Self(AtomicU64::new(self.get()))
    }
}

pub(crate) fn check_spatial(h: usize, w: usize, what: &str) -> Result<()> {
    if h % 4 != 0 || w % 4 != 0 || h < 8 || w < 8 {
        return Err(crate::Error::shape(format!(
            "{what} needs H and W to be multiples of 4 and at least 8, got {h}x{w}"
        )));
    }
    Ok(())
}
