use crate::error::{Error, Result};
use crate::nn::{add_global_context, check_spatial, conv_layer, leaky_gain, ConvLayer, EvalCounter};
use crate::numerics::{Binding, ParamSet, Rng, Tape, Tensor, Var};

/// Noise predictor: a small conv encoder-decoder with additive skips.
///
/// Input is the noisy image plus one constant plane holding `t / T`; output
/// has the image's channel count. Channel widths run 16 → 32 → 64 → 32 → 16.
#[derive(Clone, Debug)]
pub struct EpsilonNet {
    params: ParamSet,
    channels: usize,
    enc1: ConvLayer,
    enc2: ConvLayer,
    enc3: ConvLayer,
    context: ConvLayer,
    dec1: ConvLayer,
    dec2: ConvLayer,
    out: ConvLayer,
    evals: EvalCounter,
}

impl EpsilonNet {
    pub fn new(channels: usize, rng: &Rng) -> Result<Self> {
        let mut rng = rng.split("epsilon_net");
        let mut p = ParamSet::new();
        let g = leaky_gain();
        let enc1 = conv_layer(&mut p, &mut rng, "enc1", channels + 1, 16, 3, 1, g)?;
        let enc2 = conv_layer(&mut p, &mut rng, "enc2", 16, 32, 3, 2, g)?;
        let enc3 = conv_layer(&mut p, &mut rng, "enc3", 32, 64, 3, 2, g)?;
        let context = conv_layer(&mut p, &mut rng, "context", 64, 64, 1, 1, g)?;
        let dec1 = conv_layer(&mut p, &mut rng, "dec1", 64, 32, 3, 1, g)?;
        let dec2 = conv_layer(&mut p, &mut rng, "dec2", 32, 16, 3, 1, g)?;
        // Small output weights keep the initial prediction near zero.
        let out = conv_layer(&mut p, &mut rng, "out", 16, channels, 3, 1, 0.1)?;
        Ok(Self {
            params: p,
            channels,
            enc1,
            enc2,
            enc3,
            context,
            dec1,
            dec2,
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

    /// Records a forward pass. `x_t` is `[N, C, H, W]`, `t_frac` holds `t / T` per sample.
    pub fn forward(&self, tape: &mut Tape, p: &Binding, x_t: Var, t_frac: &[f32]) -> Result<Var> {
        let (n, c, h, w) = tape.value(x_t).dims4()?;
        if c != self.channels {
            return Err(Error::shape(format!(
                "epsilon net expects {} channels, got {c}",
                self.channels
            )));
        }
        if t_frac.len() != n {
            return Err(Error::shape(format!("{} timesteps for a batch of {n}", t_frac.len())));
        }
        check_spatial(h, w, "epsilon net")?;
        let plane: Vec<f32> = t_frac
            .iter()
            .flat_map(|&t| std::iter::repeat(t).take(h * w))
            .collect();
        let plane = tape.constant(Tensor::new(vec![n, 1, h, w], plane)?);
        let input = tape.concat_channels(x_t, plane)?;

        let e1 = self.enc1.apply_act(tape, p, input)?;
        let e2 = self.enc2.apply_act(tape, p, e1)?;
        let e3 = self.enc3.apply_act(tape, p, e2)?;
        let e3 = add_global_context(tape, p, &self.context, e3)?;
        let u1 = tape.upsample_nearest(e3, 2)?;
        let d1 = self.dec1.apply_act(tape, p, u1)?;
        let d1 = tape.add(d1, e2)?;
        let u2 = tape.upsample_nearest(d1, 2)?;
        let d2 = self.dec2.apply_act(tape, p, u2)?;
        let d2 = tape.add(d2, e1)?;
        let out = self.out.apply(tape, p, d2)?;
        self.evals.add(n);
        Ok(out)
    }

    /// Inference-only prediction of the noise in `x_t` (`[N, C, H, W]`).
    pub fn predict(&self, x_t: &Tensor, t_frac: &[f32]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let p = tape.bind(&self.params, false);
        let x = tape.constant(x_t.clone());
        let y = self.forward(&mut tape, &p, x, t_frac)?;
        Ok(tape.value(y).clone())
    }
}
