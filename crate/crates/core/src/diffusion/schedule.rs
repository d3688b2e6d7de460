use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// DDPM noise schedule over steps `1..=T`.
///
/// Betas are held as `f32` (the precision they are stored with in
/// checkpoints); the running product is taken in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    beta: Vec<f32>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn from_betas(beta: Vec<f32>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        if let Some(b) = beta.iter().find(|&&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::invalid(format!("beta {b} outside (0, 1)")));
        }
        let mut alpha_bar = Vec::with_capacity(beta.len());
        let mut acc = 1.0f64;
        for &b in &beta {
            acc *= 1.0 - f64::from(b);
            alpha_bar.push(acc);
        }
        Ok(Self { beta, alpha_bar })
    }

    /// Linearly spaced betas including both endpoints.
    pub fn linear(steps: usize, beta_start: f32, beta_end: f32) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::invalid(format!(
                "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
            )));
        }
        let (s, e) = (f64::from(beta_start), f64::from(beta_end));
        let beta = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_start
                } else {
                    (s + (e - s) * i as f64 / (steps - 1) as f64) as f32
                }
            })
            .collect();
        Self::from_betas(beta)
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    fn check(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.steps() {
            return Err(Error::invalid(format!(
                "timestep {t} outside 1..={}",
                self.steps()
            )));
        }
        Ok(t - 1)
    }

    pub fn beta(&self, t: usize) -> Result<f32> {
        Ok(self.beta[self.check(t)?])
    }

    pub fn alpha(&self, t: usize) -> Result<f64> {
        Ok(1.0 - f64::from(self.beta[self.check(t)?]))
    }

    /// Cumulative product of alphas up to `t`; `alpha_bar(0) == 1`.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Ok(1.0);
        }
        Ok(self.alpha_bar[self.check(t)?])
    }

    pub fn betas(&self) -> &[f32] {
        &self.beta
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.steps()], self.beta.clone()).expect("non-empty schedule")
    }
}

impl Default for NoiseSchedule {
    /// 200 steps from 1e-4 to 0.02.
    fn default() -> Self {
        Self::linear(200, 1e-4, 0.02).expect("valid default schedule")
    }
}

/// Forward process: `sqrt(ab_t) x0 + sqrt(1 - ab_t) eps`.
pub fn q_sample(x0: &Tensor, t: usize, eps: &Tensor, schedule: &NoiseSchedule) -> Result<Tensor> {
    let ab = schedule.alpha_bar(t)?;
    if t == 0 {
        return Err(Error::invalid("q_sample needs t >= 1"));
    }
    if x0.shape() != eps.shape() {
        return Err(Error::shape(format!(
            "q_sample: x0 {:?} vs eps {:?}",
            x0.shape(),
            eps.shape()
        )));
    }
    let (a, b) = (ab.sqrt() as f32, (1.0 - ab).sqrt() as f32);
    x0.zip_map(eps, |x, e| a * x + b * e)
}

/// Per-sample `q_sample` over a batch `[N, ...]` with one timestep per sample.
pub fn q_sample_batch(x0: &Tensor, ts: &[usize], eps: &Tensor, schedule: &NoiseSchedule) -> Result<Tensor> {
    if x0.shape() != eps.shape() {
        return Err(Error::shape("q_sample: x0 and eps differ in shape"));
    }
    let n = x0.shape()[0];
    if ts.len() != n {
        return Err(Error::shape(format!("{} timesteps for a batch of {n}", ts.len())));
    }
    let per = x0.numel() / n;
    let mut out = Vec::with_capacity(x0.numel());
    for (i, &t) in ts.iter().enumerate() {
        if t == 0 {
            return Err(Error::invalid("q_sample needs t >= 1"));
        }
        let ab = schedule.alpha_bar(t)?;
        let (a, b) = (ab.sqrt() as f32, (1.0 - ab).sqrt() as f32);
        let xs = &x0.data()[i * per..(i + 1) * per];
        let es = &eps.data()[i * per..(i + 1) * per];
        out.extend(xs.iter().zip(es).map(|(&x, &e)| a * x + b * e));
    }
    Tensor::new(x0.shape().to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{randn, Rng};

    #[test]
    fn single_step() {
        let s = NoiseSchedule::linear(1, 1e-4, 0.02).unwrap();
        assert_eq!(s.betas(), &[1e-4]);
        assert!((s.alpha_bar(1).unwrap() - (1.0 - 1e-4)).abs() < 1e-9);
    }

    #[test]
    fn two_step_hand_product() {
        let s = NoiseSchedule::linear(2, 0.1, 0.2).unwrap();
        assert!((s.alpha_bar(1).unwrap() - 0.9).abs() < 1e-7);
        assert!((s.alpha_bar(2).unwrap() - 0.72).abs() < 1e-7);
    }

    #[test]
    fn default_is_strictly_decreasing() {
        let s = NoiseSchedule::default();
        assert_eq!(s.steps(), 200);
        assert_eq!(s.beta(1).unwrap(), 1e-4);
        assert_eq!(s.beta(200).unwrap(), 0.02);
        for t in 1..200 {
            assert!(s.alpha_bar(t + 1).unwrap() < s.alpha_bar(t).unwrap());
            assert!(s.alpha_bar(t).unwrap() > 0.0 && s.alpha_bar(t).unwrap() < 1.0);
        }
    }

    #[test]
    fn invalid_ranges() {
        assert!(NoiseSchedule::linear(0, 1e-4, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 0.0, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 0.03, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 1e-4, 1.0).is_err());
    }

    #[test]
    fn q_sample_zero_noise() {
        let s = NoiseSchedule::default();
        let x0 = randn(&mut Rng::new(1), &[1, 3, 4, 4]).unwrap();
        let zero = Tensor::zeros(&[1, 3, 4, 4]).unwrap();
        let out = q_sample(&x0, 50, &zero, &s).unwrap();
        let a = s.alpha_bar(50).unwrap().sqrt() as f32;
        for (o, x) in out.data().iter().zip(x0.data()) {
            assert_eq!(*o, a * x);
        }
        assert!(q_sample(&x0, 0, &zero, &s).is_err());
        assert!(q_sample(&x0, 201, &zero, &s).is_err());
    }

    #[test]
    fn pure_noise_at_the_end() {
        let s = NoiseSchedule::default();
        let mut rng = Rng::new(4);
        let x0 = randn(&mut rng, &[10_000]).unwrap();
        let eps = randn(&mut rng, &[10_000]).unwrap();
        let xt = q_sample(&x0, 200, &eps, &s).unwrap();
        let n = 10_000.0;
        let (mx, my) = (
            x0.data().iter().map(|&v| f64::from(v)).sum::<f64>() / n,
            xt.data().iter().map(|&v| f64::from(v)).sum::<f64>() / n,
        );
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (&a, &b) in x0.data().iter().zip(xt.data()) {
            let (a, b) = (f64::from(a) - mx, f64::from(b) - my);
            sxy += a * b;
            sxx += a * a;
            syy += b * b;
        }
        let corr = sxy / (sxx * syy).sqrt();
        // For unit-variance x0 the correlation is sqrt(alpha_bar_T), about 0.36 here.
        let expected = s.alpha_bar(200).unwrap().sqrt();
        assert!((corr - expected).abs() < 0.03, "{corr} vs {expected}");
        assert!(s.alpha_bar(200).unwrap() < 0.15);
    }
}
