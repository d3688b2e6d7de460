//! Finite-difference checks of the tape's backward pass.
//!
//! Each op output is reduced to a scalar by a fixed random weighting, so every
//! output element contributes. Central differences use `h = 1e-3` in `f32`; the
//! error is measured norm-wise, `max|analytic - numeric| / max|numeric|`,
//! which keeps elements with near-zero derivative from dominating.

use crate::error::Result;
use crate::numerics::{randn, Rng, Tape, Tensor, Var};

pub const STEP: f32 = 1e-3;
pub const TOLERANCE: f32 = 1e-2;

/// Builds an op's output from its input variables.
pub type Build = dyn Fn(&mut Tape, &[Var]) -> Result<Var>;

/// `sum(op(inputs) * r)` for a fixed random `r`, and optionally its gradients.
fn weighted_loss(build: &Build, inputs: &[Tensor], want_grads: bool) -> Result<(f32, Vec<Vec<f32>>)> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|t| if want_grads { tape.input(t.clone()) } else { tape.constant(t.clone()) })
        .collect();
    let y = build(&mut tape, &vars)?;
    let shape = tape.value(y).shape().to_vec();
    let r = randn(&mut Rng::new(12345), &shape)?;
    let n = r.numel() as f32;
    let rv = tape.constant(r);
    let prod = tape.mul(y, rv)?;
    let mean = tape.mean(prod)?;
    let loss = tape.scale(mean, n)?;
    let value = tape.value(loss).item();
    if !want_grads {
        return Ok((value, Vec::new()));
    }
    let g = tape.backward(loss)?;
    let grads = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| g.get(v).map_or_else(|| vec![0.0; t.numel()], <[f32]>::to_vec))
        .collect();
    Ok((value, grads))
}

/// Largest norm-wise relative error between backward and central differences,
/// over all inputs.
pub fn relative_error(build: &Build, inputs: &[Tensor]) -> Result<f32> {
    let (_, analytic) = weighted_loss(build, inputs, true)?;
    let mut worst = 0.0f32;
    for (k, input) in inputs.iter().enumerate() {
        let mut numeric = vec![0.0; input.numel()];
        for (i, slot) in numeric.iter_mut().enumerate() {
            let bump = |d: f32| -> Result<f32> {
                let mut xs = inputs.to_vec();
                let mut data = xs[k].data().to_vec();
                data[i] += d;
                xs[k] = Tensor::new(input.shape().to_vec(), data)?;
                Ok(weighted_loss(build, &xs, false)?.0)
            };
            *slot = (bump(STEP)? - bump(-STEP)?) / (2.0 * STEP);
        }
        let scale = numeric.iter().fold(0.0f32, |m, v| m.max(v.abs())).max(1e-6);
        let err = analytic[k]
            .iter()
            .zip(&numeric)
            .fold(0.0f32, |m, (a, n)| m.max((a - n).abs()));
        worst = worst.max(err / scale);
    }
    Ok(worst)
}

/// One differentiable op and a generator of random inputs for it.
pub struct OpCase {
    pub name: String,
    pub build: Box<Build>,
    pub inputs: Box<dyn Fn(&mut Rng) -> Vec<Tensor>>,
}

impl OpCase {
    fn new(
        name: impl Into<String>,
        build: impl Fn(&mut Tape, &[Var]) -> Result<Var> + 'static,
        inputs: impl Fn(&mut Rng) -> Vec<Tensor> + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            build: Box::new(build),
            inputs: Box::new(inputs),
        }
    }

    /// Worst error over `trials` random input draws.
    pub fn worst_error(&self, trials: u64) -> Result<f32> {
        let mut worst = 0.0f32;
        for trial in 0..trials {
            let mut rng = Rng::new(7).split(&self.name).split_index(trial);
            let inputs = (self.inputs)(&mut rng);
            worst = worst.max(relative_error(&*self.build, &inputs)?);
        }
        Ok(worst)
    }
}

fn random(rng: &mut Rng, shape: &[usize]) -> Tensor {
    randn(rng, shape).expect("non-empty shape")
}

/// Random small NCHW shape.
fn shape4(rng: &mut Rng) -> [usize; 4] {
    [
        1 + rng.below(2) as usize,
        1 + rng.below(3) as usize,
        2 + rng.below(4) as usize,
        2 + rng.below(4) as usize,
    ]
}

fn unary(rng: &mut Rng) -> Vec<Tensor> {
    let s = shape4(rng);
    vec![random(rng, &s)]
}

fn binary(rng: &mut Rng) -> Vec<Tensor> {
    let s = shape4(rng);
    vec![random(rng, &s), random(rng, &s)]
}

/// Inputs kept at least 0.05 from zero, so differences never straddle a kink.
fn away_from_zero(rng: &mut Rng) -> Vec<Tensor> {
    let s = shape4(rng);
    vec![random(rng, &s).map(|v| if v.abs() < 0.05 { v + 0.1f32.copysign(v) } else { v })]
}

/// Every differentiable op the networks use, plus a small composite network.
pub fn op_cases() -> Vec<OpCase> {
    let mut cases = vec![
        OpCase::new("add", |t, v| t.add(v[0], v[1]), binary),
        OpCase::new("sub", |t, v| t.sub(v[0], v[1]), binary),
        OpCase::new("mul", |t, v| t.mul(v[0], v[1]), binary),
        OpCase::new("scale", |t, v| t.scale(v[0], -1.7), unary),
        OpCase::new("tanh", |t, v| t.tanh(v[0]), unary),
        OpCase::new("sigmoid", |t, v| t.sigmoid(v[0]), unary),
        OpCase::new("softplus", |t, v| t.softplus(v[0]), unary),
        OpCase::new("leaky_relu", |t, v| t.leaky_relu(v[0], 0.2), away_from_zero),
        OpCase::new("abs", |t, v| t.abs(v[0]), away_from_zero),
        OpCase::new("mean", |t, v| t.mean(v[0]), unary),
        OpCase::new("sum_squares", |t, v| t.sum_squares(v[0]), unary),
        OpCase::new("mean_spatial", |t, v| t.mean_spatial(v[0]), unary),
        OpCase::new("upsample_nearest", |t, v| t.upsample_nearest(v[0], 2), unary),
        OpCase::new("concat_channels", |t, v| t.concat_channels(v[0], v[1]), |rng| {
            let [n, _, h, w] = shape4(rng);
            vec![random(rng, &[n, 2, h, w]), random(rng, &[n, 3, h, w])]
        }),
        OpCase::new("slice_channels", |t, v| t.slice_channels(v[0], 1, 2), |rng| {
            let [n, _, h, w] = shape4(rng);
            vec![random(rng, &[n, 4, h, w])]
        }),
        OpCase::new("add_spatial", |t, v| t.add_spatial(v[0], v[1]), |rng| {
            let [n, c, h, w] = shape4(rng);
            vec![random(rng, &[n, c, h, w]), random(rng, &[n, c, 1, 1])]
        }),
    ];
    for (stride, k) in [(1, 3), (2, 3), (1, 1), (2, 1)] {
        cases.push(OpCase::new(
            format!("conv2d s{stride} k{k}"),
            move |t, v| t.conv2d(v[0], v[1], v[2], stride, k / 2),
            move |rng| {
                let [n, cin, h, w] = shape4(rng);
                let cout = 1 + rng.below(3) as usize;
                vec![
                    random(rng, &[n, cin, h + 1, w + 1]),
                    random(rng, &[cout, cin, k, k]),
                    random(rng, &[cout]),
                ]
            },
        ));
    }
    // Chained layers with a smooth hidden activation: hidden pre-activations
    // can't be kept off a leaky-ReLU kink, and a stencil straddling one breaks
    // the finite difference, not the gradient.
    cases.push(OpCase::new(
        "conv-sigmoid-upsample-conv-tanh",
        |t, v| {
            let h = t.conv2d(v[0], v[1], v[2], 2, 1)?;
            let h = t.sigmoid(h)?;
            let u = t.upsample_nearest(h, 2)?;
            let y = t.conv2d(u, v[3], v[4], 1, 1)?;
            let y = t.tanh(y)?;
            t.sum_squares(y)
        },
        |rng| {
            vec![
                random(rng, &[2, 2, 4, 4]),
                random(rng, &[3, 2, 3, 3]).map(|v| v * 0.5),
                random(rng, &[3]),
                random(rng, &[2, 3, 3, 3]).map(|v| v * 0.5),
                random(rng, &[2]),
            ]
        },
    ));
    cases
}
