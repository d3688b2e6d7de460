use crate::error::{Error, Result};
use crate::nn::{add_global_context, check_spatial, conv_layer, leaky_gain, ConvLayer, EvalCounter};
use crate::numerics::{Binding, ParamSet, Rng, Tape, Tensor, Var};

/// Conditional image-to-image network.
///
/// Input is a `C`-channel state concatenated with `C` channels of
/// conditioning; a 1-channel conditioning plane is replicated first. The
/// output is tanh-bounded. Channel widths run 2C → 32 → 64 → 64 → 32 → C,
/// with additive skips at each resolution.
#[derive(Clone, Debug)]
pub struct Generator {
    params: ParamSet,
    channels: usize,
    enc1: ConvLayer,
    enc2: ConvLayer,
    enc3: ConvLayer,
    context: ConvLayer,
    dec1: ConvLayer,
    out: ConvLayer,
    evals: EvalCounter,
}

impl Generator {
    pub fn new(channels: usize, rng: &Rng) -> Result<Self> {
        let mut rng = rng.split("generator");
        let mut p = ParamSet::new();
        let g = leaky_gain();
        let enc1 = conv_layer(&mut p, &mut rng, "enc1", 2 * channels, 32, 3, 1, g)?;
        let enc2 = conv_layer(&mut p, &mut rng, "enc2", 32, 64, 3, 2, g)?;
        let enc3 = conv_layer(&mut p, &mut rng, "enc3", 64, 64, 3, 2, g)?;
        let context = conv_layer(&mut p, &mut rng, "context", 64, 64, 1, 1, g)?;
        let dec1 = conv_layer(&mut p, &mut rng, "dec1", 64, 32, 3, 1, g)?;
        let out = conv_layer(&mut p, &mut rng, "out", 32, channels, 3, 1, 1.0)?;
        Ok(Self {
            params: p,
            channels,
            enc1,
            enc2,
            enc3,
            context,
            dec1,
            out,
            evals: EvalCounter::default(),
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Number of per-sample forward passes run so far.
    pub fn evaluations(&self) -> u64 {
        self.evals.get()
    }

    pub fn reset_evaluations(&self) {
        self.evals.reset();
    }

    /// Records a forward pass. `state` is `[N, C, H, W]`; `cond` is
    /// `[N, C, H, W]` or `[N, 1, H, W]`.
    pub fn forward(&self, tape: &mut Tape, p: &Binding, state: Var, cond: &Tensor) -> Result<Var> {
        let (n, c, h, w) = tape.value(state).dims4()?;
        if c != self.channels {
            return Err(Error::shape(format!(
                "generator expects {} state channels, got {c}",
                self.channels
            )));
        }
        let (cn, cc, ch, cw) = cond.dims4()?;
        if (cn, ch, cw) != (n, h, w) {
            return Err(Error::shape(format!(
                "conditioning {:?} does not match state {:?}",
                cond.shape(),
                tape.value(state).shape()
            )));
        }
        check_spatial(h, w, "generator")?;
        let cond = match cc {
            1 => cond.repeat_channels(c)?,
            _ if cc == c => cond.clone(),
            _ => {
                return Err(Error::shape(format!(
                    "conditioning needs 1 or {c} channels, got {cc}"
                )))
            }
        };
        let cond = tape.constant(cond);
        let input = tape.concat_channels(state, cond)?;

        let e1 = self.enc1.apply_act(tape, p, input)?;
        let e2 = self.enc2.apply_act(tape, p, e1)?;
        let e3 = self.enc3.apply_act(tape, p, e2)?;
        let e3 = add_global_context(tape, p, &self.context, e3)?;
        let u1 = tape.upsample_nearest(e3, 2)?;
        let u1 = tape.add(u1, e2)?;
        let d1 = self.dec1.apply_act(tape, p, u1)?;
        let u2 = tape.upsample_nearest(d1, 2)?;
        let u2 = tape.add(u2, e1)?;
        let out = self.out.apply(tape, p, u2)?;
        let out = tape.tanh(out)?;
        self.evals.add(n);
        Ok(out)
    }

    /// Inference-only forward pass.
    pub fn generate(&self, state: &Tensor, cond: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let p = tape.bind(&self.params, false);
        let x = tape.constant(state.clone());
        let y = self.forward(&mut tape, &p, x, cond)?;
        Ok(tape.value(y).clone())
    }
}

/// Generator forward pass on batched tensors, broadcasting 1-channel conditioning.
pub fn generator_forward(g: &Generator, state: &Tensor, cond: &Tensor) -> Result<Tensor> {
    g.generate(state, cond)
}

/// Patch critic over `(image, mask)` pairs, averaged to one logit per sample.
#[derive(Clone, Debug)]
pub struct Discriminator {
    params: ParamSet,
    channels: usize,
    conv1: ConvLayer,
    conv2: ConvLayer,
    logit: ConvLayer,
}

impl Discriminator {
    pub fn new(channels: usize, rng: &Rng) -> Result<Self> {
        let mut rng = rng.split("discriminator");
        let mut p = ParamSet::new();
        let g = leaky_gain();
        let conv1 = conv_layer(&mut p, &mut rng, "conv1", channels + 1, 32, 3, 2, g)?;
        let conv2 = conv_layer(&mut p, &mut rng, "conv2", 32, 64, 3, 2, g)?;
        let logit = conv_layer(&mut p, &mut rng, "logit", 64, 1, 1, 1, 0.1)?;
        Ok(Self {
            params: p,
            channels,
            conv1,
            conv2,
            logit,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Logits `[N, 1, 1, 1]` for images `[N, C, H, W]` and masks `[N, 1, H, W]`.
    pub fn forward(&self, tape: &mut Tape, p: &Binding, image: Var, mask: Var) -> Result<Var> {
        let c = tape.value(image).dims4()?.1;
        if c != self.channels {
            return Err(Error::shape(format!(
                "discriminator expects {} channels, got {c}",
                self.channels
            )));
        }
        let x = tape.concat_channels(image, mask)?;
        let x = self.conv1.apply_act(tape, p, x)?;
        let x = self.conv2.apply_act(tape, p, x)?;
        let x = self.logit.apply(tape, p, x)?;
        tape.mean_spatial(x)
    }

    pub fn logits(&self, image: &Tensor, mask: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let p = tape.bind(&self.params, false);
        let x = tape.constant(image.clone());
        let m = tape.constant(mask.clone());
        let y = self.forward(&mut tape, &p, x, m)?;
        Ok(tape.value(y).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::randn;

    #[test]
    fn generator_output_shape_and_range() {
        let g = Generator::new(3, &Rng::new(0)).unwrap();
        let mut rng = Rng::new(1);
        let x = randn(&mut rng, &[2, 3, 32, 32]).unwrap().map(|v| v * 3.0);
        let c = randn(&mut rng, &[2, 3, 32, 32]).unwrap();
        let y = generator_forward(&g, &x, &c).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert!(y.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(g.evaluations(), 2);
    }

    #[test]
    fn one_channel_conditioning_is_broadcast() {
        let g = Generator::new(3, &Rng::new(0)).unwrap();
        let mut rng = Rng::new(2);
        let x = randn(&mut rng, &[1, 3, 16, 16]).unwrap();
        let m = randn(&mut rng, &[1, 1, 16, 16]).unwrap();
        let a = generator_forward(&g, &x, &m).unwrap();
        let b = generator_forward(&g, &x, &m.repeat_channels(3).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generator_rejects_mismatched_conditioning() {
        let g = Generator::new(3, &Rng::new(0)).unwrap();
        let x = Tensor::zeros(&[1, 3, 16, 16]).unwrap();
        assert!(generator_forward(&g, &x, &Tensor::zeros(&[1, 1, 16, 8]).unwrap()).is_err());
        assert!(generator_forward(&g, &x, &Tensor::zeros(&[1, 2, 16, 16]).unwrap()).is_err());
        assert!(generator_forward(&g, &x, &Tensor::zeros(&[2, 1, 16, 16]).unwrap()).is_err());
    }

    #[test]
    fn discriminator_gives_one_logit_per_sample() {
        let d = Discriminator::new(3, &Rng::new(0)).unwrap();
        let mut rng = Rng::new(3);
        let x = randn(&mut rng, &[4, 3, 32, 32]).unwrap();
        let m = Tensor::zeros(&[4, 1, 32, 32]).unwrap();
        let y = d.logits(&x, &m).unwrap();
        assert_eq!(y.shape(), &[4, 1, 1, 1]);
        assert!(y.data().iter().all(|v| v.abs() < 1.0));
    }
}
