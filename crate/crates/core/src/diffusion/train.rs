use crate::data::Image;
use crate::diffusion::{q_sample_batch, EpsilonNet, NoiseSchedule};
use crate::error::{Error, Result};
use crate::numerics::{randn, Adam, AdamConfig, Rng, Tape, Tensor};

/// Stacks equally sized images into a `[N, C, H, W]` batch.
pub fn images_to_batch<'a>(images: impl IntoIterator<Item = &'a Image>) -> Result<Tensor> {
    let tensors: Vec<Tensor> = images.into_iter().map(Image::to_tensor).collect();
    if tensors.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    Tensor::stack(&tensors)
}

/// One epsilon-prediction step: random `t` and noise per example, loss is the
/// per-element mean squared error, followed by one Adam update.
pub fn ddpm_train_step(
    net: &mut EpsilonNet,
    x0: &Tensor,
    rng: &mut Rng,
    schedule: &NoiseSchedule,
    opt: &mut Adam,
) -> Result<f32> {
    let (n, _, _, _) = x0.dims4().map_err(|_| Error::invalid("empty batch"))?;
    let steps = schedule.steps();
    let ts: Vec<usize> = (0..n).map(|_| 1 + rng.below(steps as u64) as usize).collect();
    let eps = randn(rng, x0.shape())?;
    let x_t = q_sample_batch(x0, &ts, &eps, schedule)?;
    let t_frac: Vec<f32> = ts.iter().map(|&t| t as f32 / steps as f32).collect();

    let mut tape = Tape::new();
    let p = tape.bind(net.params(), true);
    let x = tape.constant(x_t);
    let pred = net.forward(&mut tape, &p, x, &t_frac)?;
    let target = tape.constant(eps);
    let diff = tape.sub(pred, target)?;
    let ss = tape.sum_squares(diff)?;
    let loss = tape.scale(ss, 1.0 / x0.numel() as f32)?;
    let value = tape.value(loss).item();

    let grads = tape.backward(loss)?;
    let params = net.params_mut();
    params.zero_grad();
    grads.accumulate_into(&p, params)?;
    opt.step(params)?;
    Ok(value)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DdpmTrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f32,
    /// Decay of the weight average that becomes the trained network; 0 keeps
    /// the raw weights.
    pub ema_decay: f32,
    pub seed: u64,
}

impl Default for DdpmTrainConfig {
    fn default() -> Self {
        Self {
            steps: 8000,
            batch: 16,
            lr: 1e-3,
            ema_decay: 0.999,
            seed: 0,
        }
    }
}

/// Trains `net` on `data`, sampling batches with replacement. Returns the loss
/// of every step; `on_step` sees `(step, loss)` as training proceeds.
pub fn train_ddpm(
    net: &mut EpsilonNet,
    data: &[Image],
    schedule: &NoiseSchedule,
    cfg: &DdpmTrainConfig,
    mut on_step: impl FnMut(usize, f32),
) -> Result<Vec<f32>> {
    if data.is_empty() || cfg.batch == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if !(0.0..1.0).contains(&cfg.ema_decay) {
        return Err(Error::invalid(format!("EMA decay {} is outside [0, 1)", cfg.ema_decay)));
    }
    let root = Rng::new(cfg.seed);
    let mut pick = root.split("ddpm.batches");
    let mut noise = root.split("ddpm.noise");
    let mut opt = Adam::new(net.params(), AdamConfig::new(cfg.lr));
    let mut ema = net.params().clone();
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch = images_to_batch(
            (0..cfg.batch).map(|_| &data[pick.below(data.len() as u64) as usize]),
        )?;
        let loss = ddpm_train_step(net, &batch, &mut noise, schedule, &mut opt)?;
        // Warm-up keeps the initial weights from lingering in short runs.
        let decay = cfg.ema_decay.min((1 + step) as f32 / (10 + step) as f32);
        ema.ema_update(net.params(), decay)?;
        on_step(step, loss);
        losses.push(loss);
    }
    net.params_mut().load_from(&ema)?;
    Ok(losses)
}
