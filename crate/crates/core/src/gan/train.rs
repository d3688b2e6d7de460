use crate::data::{Image, MaskFamily};
use crate::diffusion::{images_to_batch, q_sample_batch, NoiseSchedule};
use crate::error::{Error, Result};
use crate::gan::{Discriminator, Generator};
use crate::numerics::{randn, Adam, AdamConfig, Rng, Tape, Tensor};

/// Adam betas for both networks. The usual conditional-GAN choice: a low
/// first-moment decay keeps the adversarial game from oscillating.
const ADAM_BETAS: (f32, f32) = (0.5, 0.999);

#[derive(Clone, Debug, PartialEq)]
pub struct GanTrainConfig {
    pub lr_g: f32,
    pub lr_d: f32,
    pub lambda_l1: f32,
    /// Share of examples whose generator conditioning is Gaussian noise
    /// instead of the mask, as in the sampling loop.
    pub noise_cond_prob: f32,
    pub batch: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        Self {
            lr_g: 2e-4,
            lr_d: 2e-4,
            lambda_l1: 10.0,
            noise_cond_prob: 0.5,
            batch: 16,
            steps: 3000,
            seed: 0,
        }
    }
}

impl GanTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f32| v.is_finite() && v > 0.0;
        if !ok(self.lr_g) || !ok(self.lr_d) || !ok(self.lambda_l1) || self.batch == 0 || self.steps == 0 {
            return Err(Error::invalid(format!(
                "GAN training settings must all be positive: {self:?}"
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_cond_prob) {
            return Err(Error::invalid(format!(
                "noise conditioning probability {} is outside [0, 1]",
                self.noise_cond_prob
            )));
        }
        Ok(())
    }
}

/// Optimizer state for both players.
#[derive(Clone, Debug)]
pub struct GanOptimizers {
    pub generator: Adam,
    pub discriminator: Adam,
}

impl GanOptimizers {
    pub fn new(g: &Generator, d: &Discriminator, cfg: &GanTrainConfig) -> Self {
        let (b1, b2) = ADAM_BETAS;
        Self {
            generator: Adam::new(g.params(), AdamConfig::new(cfg.lr_g).with_betas(b1, b2)),
            discriminator: Adam::new(d.params(), AdamConfig::new(cfg.lr_d).with_betas(b1, b2)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GanLosses {
    /// Adversarial term plus `lambda_l1` times the reconstruction term.
    pub generator: f32,
    pub discriminator: f32,
    /// Mean absolute error of the generator output against the clean batch.
    pub l1: f32,
}

/// Masks `[N, 1, H, W]`, the generator input state and the generator
/// conditioning `[N, C, H, W]` for a clean batch.
struct Corrupted {
    masks: Tensor,
    state: Tensor,
    cond: Tensor,
}

/// Largest noise level of the noise-conditioned examples. The stabilized loop
/// settles near a noise std of 0.3, so this covers it with margin.
const LOOP_NOISE_MAX: f32 = 0.6;

/// Per example, with probability `noise_prob`: the clean image plus Gaussian
/// noise of a level drawn from `[0, LOOP_NOISE_MAX)`, conditioned on standard
/// normal noise. This is the generator's job inside the sampling loop, where
/// it has to act as a denoiser that leaves the signal gain at one. Any gain or
/// bias there compounds over the loop's steps.
///
/// Otherwise: a mask from a random family, hole pixels zeroed, then the forward
/// diffusion at a uniformly drawn step, conditioned on the broadcast mask.
fn corrupt(x0: &Tensor, rng: &mut Rng, schedule: &NoiseSchedule, noise_prob: f32) -> Result<Corrupted> {
    let (n, c, h, w) = x0.dims4()?;
    let hw = h * w;
    let per = c * hw;
    let mut masks = Vec::with_capacity(n * hw);
    let mut masked = x0.data().to_vec();
    for s in 0..n {
        let m = MaskFamily::sample_any(rng, h, w)?;
        for ch in 0..c {
            let plane = &mut masked[(s * c + ch) * hw..][..hw];
            for (v, &hole) in plane.iter_mut().zip(m.data()) {
                if hole == 1.0 {
                    *v = 0.0;
                }
            }
        }
        masks.extend_from_slice(m.data());
    }
    let ts: Vec<usize> = (0..n).map(|_| 1 + rng.below(schedule.steps() as u64) as usize).collect();
    let eps = randn(rng, x0.shape())?;
    let masked = Tensor::new(x0.shape().to_vec(), masked)?;
    let mut state = q_sample_batch(&masked, &ts, &eps, schedule)?;
    let mut cond = Vec::with_capacity(n * per);
    for s in 0..n {
        if rng.bernoulli(noise_prob) {
            cond.extend((0..per).map(|_| rng.normal()));
            let sigma = rng.uniform() * LOOP_NOISE_MAX;
            let range = s * per..(s + 1) * per;
            for ((v, &x), &e) in state.data_mut()[range.clone()]
                .iter_mut()
                .zip(&x0.data()[range.clone()])
                .zip(&eps.data()[range])
            {
                *v = x + sigma * e;
            }
        } else {
            for _ in 0..c {
                cond.extend_from_slice(&masks[s * hw..][..hw]);
            }
        }
    }
    Ok(Corrupted {
        masks: Tensor::new(vec![n, 1, h, w], masks)?,
        state,
        cond: Tensor::new(vec![n, c, h, w], cond)?,
    })
}

/// Discriminator half of a step; `fake` is treated as a constant.
fn discriminator_update(d: &mut Discriminator, real: &Tensor, fake: &Tensor, masks: &Tensor, opt: &mut Adam) -> Result<f32> {
    let mut t = Tape::new();
    let dp = t.bind(d.params(), true);
    let real = t.constant(real.clone());
    let fake = t.constant(fake.clone());
    let m = t.constant(masks.clone());
    let real_logits = d.forward(&mut t, &dp, real, m)?;
    let fake_logits = d.forward(&mut t, &dp, fake, m)?;
    // -log sigmoid(l) = softplus(-l); -log(1 - sigmoid(l)) = softplus(l)
    let neg = t.scale(real_logits, -1.0)?;
    let real_term = t.softplus(neg)?;
    let real_term = t.mean(real_term)?;
    let fake_term = t.softplus(fake_logits)?;
    let fake_term = t.mean(fake_term)?;
    let sum = t.add(real_term, fake_term)?;
    let loss = t.scale(sum, 0.5)?;
    let value = t.value(loss).item();
    let grads = t.backward(loss)?;
    let params = d.params_mut();
    params.zero_grad();
    grads.accumulate_into(&dp, params)?;
    opt.step(params)?;
    Ok(value)
}

/// One alternating update: the discriminator first, against the current
/// generator's output, then the generator against the updated discriminator.
/// Both use non-saturating binary cross-entropy on logits.
pub fn gan_train_step(
    g: &mut Generator,
    d: &mut Discriminator,
    x0: &Tensor,
    rng: &mut Rng,
    schedule: &NoiseSchedule,
    opts: &mut GanOptimizers,
    cfg: &GanTrainConfig,
) -> Result<GanLosses> {
    if x0.dims4().map_err(|_| Error::invalid("empty batch"))?.0 == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let batch = corrupt(x0, rng, schedule, cfg.noise_cond_prob)?;

    // Generator pass, kept on its tape for the generator update below.
    let mut gt = Tape::new();
    let gp = gt.bind(g.params(), true);
    let state = gt.constant(batch.state);
    let fake = g.forward(&mut gt, &gp, state, &batch.cond)?;

    let loss_d = discriminator_update(d, x0, gt.value(fake), &batch.masks, &mut opts.discriminator)?;

    let dp = gt.bind(d.params(), false);
    let m = gt.constant(batch.masks);
    let logits = d.forward(&mut gt, &dp, fake, m)?;
    let neg = gt.scale(logits, -1.0)?;
    let adv = gt.softplus(neg)?;
    let adv = gt.mean(adv)?;
    let target = gt.constant(x0.clone());
    let diff = gt.sub(fake, target)?;
    let abs = gt.abs(diff)?;
    let l1 = gt.mean(abs)?;
    let weighted = gt.scale(l1, cfg.lambda_l1)?;
    let loss_g = gt.add(adv, weighted)?;
    let losses = GanLosses {
        generator: gt.value(loss_g).item(),
        discriminator: loss_d,
        l1: gt.value(l1).item(),
    };
    let grads = gt.backward(loss_g)?;
    let params = g.params_mut();
    params.zero_grad();
    grads.accumulate_into(&gp, params)?;
    opts.generator.step(params)?;
    Ok(losses)
}

/// Trains both networks on `data`, sampling batches with replacement.
pub fn train_gan(
    g: &mut Generator,
    d: &mut Discriminator,
    data: &[Image],
    schedule: &NoiseSchedule,
    cfg: &GanTrainConfig,
    mut on_step: impl FnMut(usize, &GanLosses),
) -> Result<Vec<GanLosses>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let root = Rng::new(cfg.seed);
    let mut pick = root.split("gan.batches");
    let mut noise = root.split("gan.noise");
    let mut opts = GanOptimizers::new(g, d, cfg);
    let mut history = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch = images_to_batch(
            (0..cfg.batch).map(|_| &data[pick.below(data.len() as u64) as usize]),
        )?;
        let losses = gan_train_step(g, d, &batch, &mut noise, schedule, &mut opts, cfg)?;
        on_step(step, &losses);
        history.push(losses);
    }
    Ok(history)
}

/// Mean absolute reconstruction error of `g` on `images` under the training
/// corruption (random mask family and noise level), drawn from `rng`.
pub fn reconstruction_l1(g: &Generator, images: &[Image], schedule: &NoiseSchedule, rng: &mut Rng) -> Result<f32> {
    let x0 = images_to_batch(images)?;
    let batch = corrupt(&x0, rng, schedule, 0.0)?;
    let out = g.generate(&batch.state, &batch.masks)?;
    let sum: f64 = out
        .data()
        .iter()
        .zip(x0.data())
        .map(|(a, b)| f64::from((a - b).abs()))
        .sum();
    Ok((sum / x0.numel() as f64) as f32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_toyshapes, DatasetSpec};

    fn setup() -> (Generator, Discriminator, Tensor) {
        let root = Rng::new(7);
        let g = Generator::new(3, &root).unwrap();
        let d = Discriminator::new(3, &root).unwrap();
        let data = gen_toyshapes(&DatasetSpec::new(8, 16, 1)).unwrap();
        (g, d, images_to_batch(&data).unwrap())
    }

    #[test]
    fn step_zero_losses_are_near_ln2() {
        let (mut g, mut d, x0) = setup();
        let cfg = GanTrainConfig {
            lambda_l1: 0.0,
            ..Default::default()
        };
        let mut opts = GanOptimizers::new(&g, &d, &cfg);
        let s = NoiseSchedule::default();
        let l = gan_train_step(&mut g, &mut d, &x0, &mut Rng::new(1), &s, &mut opts, &cfg).unwrap();
        let ln2 = std::f32::consts::LN_2;
        assert!((l.generator - ln2).abs() < 0.3, "{l:?}");
        assert!((l.discriminator - ln2).abs() < 0.3, "{l:?}");
    }

    #[test]
    fn step_updates_both_players() {
        let (mut g, mut d, x0) = setup();
        let (g0, d0) = (g.params().value_bytes(), d.params().value_bytes());
        let cfg = GanTrainConfig::default();
        let mut opts = GanOptimizers::new(&g, &d, &cfg);
        let s = NoiseSchedule::default();
        gan_train_step(&mut g, &mut d, &x0, &mut Rng::new(1), &s, &mut opts, &cfg).unwrap();
        assert_ne!(g.params().value_bytes(), g0);
        assert_ne!(d.params().value_bytes(), d0);
        assert_eq!(opts.generator.state().step_count(), 1);
        assert_eq!(opts.discriminator.state().step_count(), 1);
    }

    #[test]
    fn each_update_touches_only_its_own_network() {
        let (mut g, mut d, x0) = setup();
        let cfg = GanTrainConfig::default();
        let s = NoiseSchedule::default();

        // Replay the discriminator half by hand from the same random stream.
        let (g_ref, mut d_ref) = (g.clone(), d.clone());
        let mut opts_ref = GanOptimizers::new(&g_ref, &d_ref, &cfg);
        let batch = corrupt(&x0, &mut Rng::new(1), &s, cfg.noise_cond_prob).unwrap();
        let fake = g_ref.generate(&batch.state, &batch.cond).unwrap();
        let g_before = g_ref.params().value_bytes();
        discriminator_update(&mut d_ref, &x0, &fake, &batch.masks, &mut opts_ref.discriminator).unwrap();
        assert_eq!(g_ref.params().value_bytes(), g_before);

        let mut opts = GanOptimizers::new(&g, &d, &cfg);
        gan_train_step(&mut g, &mut d, &x0, &mut Rng::new(1), &s, &mut opts, &cfg).unwrap();
        // The generator update left the discriminator exactly as its own step did.
        assert_eq!(d.params().value_bytes(), d_ref.params().value_bytes());
        assert_ne!(g.params().value_bytes(), g_before);
    }

    #[test]
    fn config_must_be_positive() {
        assert!(GanTrainConfig::default().validate().is_ok());
        let bad = GanTrainConfig {
            lr_d: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
