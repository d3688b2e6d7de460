use std::time::Instant;

use crate::data::{apply_mask, composite, Image, Mask};
use crate::diffusion::noise_batch;
use crate::error::{Error, Result};
use crate::gan::Generator;
use crate::numerics::{Rng, Tensor};
use crate::sampler::{DriftModel, DriftRole, SamplerConfig, SamplerMode};
use crate::trace::{rms_per_batch, SampleTrace};

fn count(trace: &mut SampleTrace, role: DriftRole) {
    match role {
        DriftRole::Generator => trace.generator_evals += 1,
        DriftRole::EpsilonNet => trace.epsilon_net_evals += 1,
    }
}

/// Runs the denoising loop on a batch `[N, C, H, W]` with one RNG stream per
/// sample. Returns the final state, not clamped, and per-sample costs.
///
/// Each stream first yields the sample's conditioning noise, then one noise
/// draw per step, so batch rows match single-sample runs.
pub fn denoise_diffusion_batch(
    x: &Tensor,
    model: &dyn DriftModel,
    cfg: &SamplerConfig,
    rngs: &mut [Rng],
) -> Result<(Tensor, SampleTrace)> {
    let start = Instant::now();
    if model.role() != cfg.drift_model {
        return Err(Error::invalid(format!(
            "sampler is configured for a {} drift model but got a {}",
            cfg.drift_model,
            model.role()
        )));
    }
    let (n, c, h, w) = x.dims4()?;
    if rngs.len() != n {
        return Err(Error::shape(format!("{} RNG streams for a batch of {n}", rngs.len())));
    }
    let mut trace = SampleTrace::default();
    let steps = cfg.timesteps;
    let mut x = x.clone();
    if steps == 0 {
        trace.wall = start.elapsed();
        return Ok((x, trace));
    }
    let cond = noise_batch(rngs, &[1, c, h, w])?;
    let sigma = match cfg.mode {
        SamplerMode::Verbatim => 2.0f32.sqrt(),
        SamplerMode::Stabilized => (2.0 / steps as f32).sqrt(),
    };
    let rate = (1.0 / steps as f32).sqrt();
    for i in 1..=steps {
        let eps = noise_batch(rngs, &[1, c, h, w])?;
        for (v, &e) in x.data_mut().iter_mut().zip(eps.data()) {
            *v += sigma * e;
        }
        let out = model.predict(&x, &cond, i, steps)?;
        count(&mut trace, model.role());
        let drift = model.drift(out, &x, cfg.mode, i, steps)?;
        if drift.shape() != x.shape() {
            return Err(Error::shape(format!(
                "drift {:?} does not match state {:?}",
                drift.shape(),
                x.shape()
            )));
        }
        for (v, &d) in x.data_mut().iter_mut().zip(drift.data()) {
            *v += d * rate;
        }
        if !x.is_finite() {
            return Err(Error::Diverged(i));
        }
        trace.step_norms.push(rms_per_batch(x.data()));
    }
    trace.wall = start.elapsed();
    Ok((x, trace))
}

/// Single-image form of [`denoise_diffusion_batch`].
pub fn denoise_diffusion(
    x: &Image,
    model: &dyn DriftModel,
    cfg: &SamplerConfig,
    rng: &mut Rng,
) -> Result<(Tensor, SampleTrace)> {
    denoise_diffusion_batch(&x.to_tensor(), model, cfg, std::slice::from_mut(rng))
}

/// Batched inpainting. Each input is masked (holes zeroed), run through the
/// denoising loop driven by `loop_model`, clamped, and passed once more
/// through `g` with the mask as conditioning. Known pixels of the result are
/// copied from the masked input.
pub fn diffganpaint_inpaint_batch(
    inputs: &[Image],
    masks: &[Mask],
    g: &Generator,
    loop_model: &dyn DriftModel,
    cfg: &SamplerConfig,
    rngs: &mut [Rng],
) -> Result<(Vec<Image>, SampleTrace)> {
    let start = Instant::now();
    if inputs.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if masks.len() != inputs.len() || rngs.len() != inputs.len() {
        return Err(Error::shape(format!(
            "{} images, {} masks and {} RNG streams",
            inputs.len(),
            masks.len(),
            rngs.len()
        )));
    }
    if inputs.iter().any(|i| !i.same_dims(&inputs[0])) {
        return Err(Error::shape("batch images differ in size"));
    }
    let masked = inputs
        .iter()
        .zip(masks)
        .map(|(i, m)| apply_mask(i, m))
        .collect::<Result<Vec<_>>>()?;
    let x = Tensor::stack(&masked.iter().map(Image::to_tensor).collect::<Vec<_>>())?;
    let (denoised, mut trace) = denoise_diffusion_batch(&x, loop_model, cfg, rngs)?;
    let denoised = denoised.map(|v| v.clamp(-1.0, 1.0));
    let cond = Tensor::stack(&masks.iter().map(Mask::to_tensor).collect::<Vec<_>>())?;
    let out = g.generate(&denoised, &cond)?;
    trace.generator_evals += 1;
    let results = masked
        .iter()
        .zip(masks)
        .enumerate()
        .map(|(i, (known, m))| composite(&Image::from_tensor_clamped(&out.sample(i)?)?, known, m))
        .collect::<Result<Vec<_>>>()?;
    trace.wall = start.elapsed();
    Ok((results, trace))
}

/// Inpaints one image with `g` both inside the loop and for the final pass.
pub fn diffganpaint_inpaint(
    input: &Image,
    mask: &Mask,
    g: &Generator,
    cfg: &SamplerConfig,
    rng: &mut Rng,
) -> Result<(Image, SampleTrace)> {
    let (mut out, trace) = diffganpaint_inpaint_batch(
        std::slice::from_ref(input),
        std::slice::from_ref(mask),
        g,
        g,
        cfg,
        std::slice::from_mut(rng),
    )?;
    Ok((out.remove(0), trace))
}
