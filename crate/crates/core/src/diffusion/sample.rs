use std::time::Instant;

use crate::data::{composite, Image, Mask};
use crate::diffusion::{q_sample, EpsilonNet, NoiseSchedule};
use crate::error::{Error, Result};
use crate::numerics::{randn, Rng, Tensor};
use crate::trace::{rms_per_batch, SampleTrace};

pub(crate) fn noise_batch(rngs: &mut [Rng], shape: &[usize]) -> Result<Tensor> {
    let parts = rngs
        .iter_mut()
        .map(|r| randn(r, shape))
        .collect::<Result<Vec<_>>>()?;
    Tensor::stack(&parts)
}

/// `x <- (x - beta_t / sqrt(1 - ab_t) * eps) / sqrt(alpha_t) + sqrt(beta_t) * z`
fn reverse_step(x: &mut [f32], eps: &[f32], z: Option<&[f32]>, t: usize, s: &NoiseSchedule) -> Result<()> {
    let beta = f64::from(s.beta(t)?);
    let c1 = (1.0 / s.alpha(t)?.sqrt()) as f32;
    let c2 = (beta / (1.0 - s.alpha_bar(t)?).sqrt()) as f32;
    let sigma = beta.sqrt() as f32;
    match z {
        Some(z) => {
            for ((x, &e), &z) in x.iter_mut().zip(eps).zip(z) {
                *x = c1 * (*x - c2 * e) + sigma * z;
            }
        }
        None => {
            for (x, &e) in x.iter_mut().zip(eps) {
                *x = c1 * (*x - c2 * e);
            }
        }
    }
    Ok(())
}

/// Ancestral DDPM sampling for a batch, one RNG stream per sample.
pub fn ancestral_sample_batch(
    net: &EpsilonNet,
    schedule: &NoiseSchedule,
    rngs: &mut [Rng],
    height: usize,
    width: usize,
) -> Result<(Vec<Image>, SampleTrace)> {
    let start = Instant::now();
    let c = net.channels();
    let mut x = noise_batch(rngs, &[1, c, height, width])?;
    let steps = schedule.steps();
    let mut trace = SampleTrace::default();
    for t in (1..=steps).rev() {
        let frac = vec![t as f32 / steps as f32; rngs.len()];
        let eps = net.predict(&x, &frac)?;
        trace.epsilon_net_evals += 1;
        let z = if t > 1 {
            Some(noise_batch(rngs, &[1, c, height, width])?)
        } else {
            None
        };
        reverse_step(x.data_mut(), eps.data(), z.as_ref().map(Tensor::data), t, schedule)?;
        if !x.is_finite() {
            return Err(Error::Diverged(steps - t + 1));
        }
        trace.step_norms.push(rms_per_batch(x.data()));
    }
    let images = (0..rngs.len())
        .map(|i| Image::from_tensor_clamped(&x.sample(i)?))
        .collect::<Result<Vec<_>>>()?;
    trace.wall = start.elapsed();
    Ok((images, trace))
}

/// Draws one image with `T` reverse steps; the result is clamped to `[-1, 1]`.
pub fn ancestral_sample(
    net: &EpsilonNet,
    schedule: &NoiseSchedule,
    rng: &mut Rng,
    height: usize,
    width: usize,
) -> Result<(Image, SampleTrace)> {
    let mut rngs = [rng.clone()];
    let (mut imgs, trace) = ancestral_sample_batch(net, schedule, &mut rngs, height, width)?;
    *rng = rngs[0].clone();
    Ok((imgs.remove(0), trace))
}

/// Mask-projected DDPM inpainting over a batch. Before each reverse step the
/// known pixels of the state are replaced by a forward-noised copy of the
/// input at the current level; the final result copies known pixels verbatim.
pub fn ddpm_inpaint_batch(
    net: &EpsilonNet,
    images: &[Image],
    masks: &[Mask],
    schedule: &NoiseSchedule,
    rngs: &mut [Rng],
) -> Result<(Vec<Image>, SampleTrace)> {
    let start = Instant::now();
    let n = images.len();
    if masks.len() != n || rngs.len() != n || n == 0 {
        return Err(Error::invalid(format!(
            "{n} images, {} masks, {} rng streams",
            masks.len(),
            rngs.len()
        )));
    }
    let first = &images[0];
    let (c, h, w) = (first.channels(), first.height(), first.width());
    if c != net.channels() {
        return Err(Error::shape(format!(
            "image has {c} channels, epsilon net expects {}",
            net.channels()
        )));
    }
    for (img, m) in images.iter().zip(masks) {
        if !img.same_dims(first) || (m.height(), m.width()) != (h, w) {
            return Err(Error::shape("image and mask dimensions differ"));
        }
    }
    let per = c * h * w;
    let hw = h * w;
    let steps = schedule.steps();
    let mut x = noise_batch(rngs, &[1, c, h, w])?;
    let mut trace = SampleTrace::default();
    let knowns: Vec<Tensor> = images.iter().map(Image::to_tensor).collect();

    for t in (1..=steps).rev() {
        for i in 0..n {
            let eps = randn(&mut rngs[i], &[1, c, h, w])?;
            let known_t = q_sample(&knowns[i], t, &eps, schedule)?;
            let xs = &mut x.data_mut()[i * per..(i + 1) * per];
            let md = masks[i].data();
            for (j, (v, &k)) in xs.iter_mut().zip(known_t.data()).enumerate() {
                if md[j % hw] == 0.0 {
                    *v = k;
                }
            }
        }
        let frac = vec![t as f32 / steps as f32; n];
        let eps = net.predict(&x, &frac)?;
        trace.epsilon_net_evals += 1;
        let z = if t > 1 {
            Some(noise_batch(rngs, &[1, c, h, w])?)
        } else {
            None
        };
        reverse_step(x.data_mut(), eps.data(), z.as_ref().map(Tensor::data), t, schedule)?;
        if !x.is_finite() {
            return Err(Error::Diverged(steps - t + 1));
        }
        trace.step_norms.push(rms_per_batch(x.data()));
    }

    let results = (0..n)
        .map(|i| {
            let generated = Image::from_tensor_clamped(&x.sample(i)?)?;
            composite(&generated, &images[i], &masks[i])
        })
        .collect::<Result<Vec<_>>>()?;
    trace.wall = start.elapsed();
    Ok((results, trace))
}

/// Single-image form of [`ddpm_inpaint_batch`].
pub fn ddpm_inpaint_baseline(
    net: &EpsilonNet,
    image: &Image,
    mask: &Mask,
    schedule: &NoiseSchedule,
    rng: &mut Rng,
) -> Result<(Image, SampleTrace)> {
    let mut rngs = [rng.clone()];
    let (mut out, trace) = ddpm_inpaint_batch(
        net,
        std::slice::from_ref(image),
        std::slice::from_ref(mask),
        schedule,
        &mut rngs,
    )?;
    *rng = rngs[0].clone();
    Ok((out.remove(0), trace))
}
