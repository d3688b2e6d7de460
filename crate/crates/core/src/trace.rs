use std::time::Duration;

/// Cost accounting for one sampling run, per sample.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleTrace {
    pub generator_evals: u64,
    pub epsilon_net_evals: u64,
    pub wall: Duration,
    /// RMS of the state after each loop step, averaged over the batch.
    pub step_norms: Vec<f32>,
}

impl SampleTrace {
    pub fn total_evals(&self) -> u64 {
        self.generator_evals + self.epsilon_net_evals
    }
}

pub(crate) fn rms_per_batch(data: &[f32]) -> f32 {
    let ss: f64 = data.iter().map(|&v| f64::from(v) * f64::from(v)).sum();
    (ss / data.len() as f64).sqrt() as f32
}
