use crate::error::{Error, Result};
use crate::numerics::ParamSet;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl AdamConfig {
    pub fn new(lr: f32) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn with_betas(mut self, beta1: f32, beta2: f32) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }
}

/// First/second moment buffers, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros = || params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// Optimizer state bundled with its hyper-parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    state: AdamState,
}

impl Adam {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        Self {
            config,
            state: AdamState::new(params),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        adam_step(params, &mut self.state, &self.config)
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }
}

/// Bias-corrected Adam update using the gradients stored on `params`.
/// Gradients are left in place; call [`ParamSet::zero_grad`] before the next pass.
pub fn adam_step(params: &mut ParamSet, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::shape(format!(
            "optimizer tracks {} tensors, parameter set has {}",
            state.m.len(),
            params.len()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - f64::from(cfg.beta1).powi(t);
    let bc2 = 1.0 - f64::from(cfg.beta2).powi(t);
    let step = (f64::from(cfg.lr) / bc1) as f32;
    let bc2_sqrt = bc2.sqrt() as f32;
    for i in 0..params.len() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        let (data, grad) = params.tensor_mut(i).split_mut();
        if m.len() != data.len() {
            return Err(Error::shape(format!("moment buffer {i} does not match its parameter")));
        }
        let Some(grad) = grad else { continue };
        for j in 0..data.len() {
            let g = grad[j];
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            data[j] -= step * m[j] / (v[j].sqrt() / bc2_sqrt + cfg.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn single(value: f32, grad: f32) -> ParamSet {
        let mut p = ParamSet::new();
        p.push("x", Tensor::new(vec![1], vec![value]).unwrap()).unwrap();
        p.tensor_mut(0).accumulate_grad(&[grad]);
        p
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = single(0.0, 0.5);
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig::new(1e-3);
        adam_step(&mut p, &mut st, &cfg).unwrap();
        // lr * g / (sqrt(g^2) + eps)
        let expected = 1e-3 * 0.5 / (0.5 + 1e-8);
        let got = -p.tensor(0).item();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = single(3.0, 0.0);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &mut st, &AdamConfig::new(1e-2)).unwrap();
        adam_step(&mut p, &mut st, &AdamConfig::new(1e-2)).unwrap();
        assert_eq!(p.tensor(0).item(), 3.0);
        assert_eq!(st.step_count(), 2);
    }

    #[test]
    fn mismatched_state_rejected() {
        let mut p = single(0.0, 1.0);
        let mut st = AdamState::new(&ParamSet::new());
        assert!(adam_step(&mut p, &mut st, &AdamConfig::new(1e-3)).is_err());
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = single(5.0, 0.0);
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig::new(0.1);
        for _ in 0..500 {
            p.zero_grad();
            let x = p.tensor(0).item();
            p.tensor_mut(0).accumulate_grad(&[2.0 * (x - 1.0)]);
            adam_step(&mut p, &mut st, &cfg).unwrap();
        }
        assert!((p.tensor(0).item() - 1.0).abs() < 1e-2);
    }
}
