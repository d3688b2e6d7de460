//! Run settings in a line-oriented `key = value` text format.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is optional
//! and falls back to its default; unknown or repeated keys are errors.

use std::fmt::Display;
use std::str::FromStr;

use crate::data::MaskFamily;
use crate::diffusion::{DdpmTrainConfig, NoiseSchedule};
use crate::error::{Error, Result};
use crate::gan::GanTrainConfig;
use crate::sampler::{DriftRole, SamplerConfig, SamplerMode};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub train_count: usize,
    pub test_count: usize,
    pub image_size: usize,
    pub channels: usize,
    pub ddpm_timesteps: usize,
    pub ddpm_beta_start: f32,
    pub ddpm_beta_end: f32,
    pub ddpm_steps: usize,
    pub ddpm_batch: usize,
    pub ddpm_lr: f32,
    pub ddpm_ema_decay: f32,
    pub gan_steps: usize,
    pub gan_batch: usize,
    pub gan_lr_g: f32,
    pub gan_lr_d: f32,
    pub gan_lambda_l1: f32,
    pub gan_noise_cond_prob: f32,
    pub sampler_timesteps: usize,
    pub sampler_mode: SamplerMode,
    pub sampler_drift: DriftRole,
    pub eval_families: Vec<MaskFamily>,
    pub eval_batch: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ddpm = DdpmTrainConfig::default();
        let gan = GanTrainConfig::default();
        let sampler = SamplerConfig::default();
        Self {
            seed: 0,
            train_count: 1000,
            test_count: 200,
            image_size: 32,
            channels: 3,
            ddpm_timesteps: 200,
            ddpm_beta_start: 1e-4,
            ddpm_beta_end: 0.02,
            ddpm_steps: ddpm.steps,
            ddpm_batch: ddpm.batch,
            ddpm_lr: ddpm.lr,
            ddpm_ema_decay: ddpm.ema_decay,
            gan_steps: gan.steps,
            gan_batch: gan.batch,
            gan_lr_g: gan.lr_g,
            gan_lr_d: gan.lr_d,
            gan_lambda_l1: gan.lambda_l1,
            gan_noise_cond_prob: gan.noise_cond_prob,
            sampler_timesteps: sampler.timesteps,
            sampler_mode: sampler.mode,
            sampler_drift: sampler.drift_model,
            eval_families: MaskFamily::ALL.to_vec(),
            eval_batch: 16,
        }
    }
}

fn parse_value<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: Display,
{
    v.parse::<T>().map_err(|e| format!("bad value {v:?}: {e}"))
}

fn parse_families(v: &str) -> std::result::Result<Vec<MaskFamily>, String> {
    let fams = v
        .split(',')
        .map(|s| s.trim().parse::<MaskFamily>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if fams.is_empty() {
        return Err("no mask families given".into());
    }
    Ok(fams)
}

impl RunConfig {
    pub const KEYS: [&'static str; 23] = [
        "seed",
        "data.train_count",
        "data.test_count",
        "data.image_size",
        "data.channels",
        "ddpm.timesteps",
        "ddpm.beta_start",
        "ddpm.beta_end",
        "ddpm.steps",
        "ddpm.batch",
        "ddpm.lr",
        "ddpm.ema_decay",
        "gan.steps",
        "gan.batch",
        "gan.lr_g",
        "gan.lr_d",
        "gan.lambda_l1",
        "gan.noise_cond_prob",
        "sampler.timesteps",
        "sampler.mode",
        "sampler.drift_model",
        "eval.families",
        "eval.batch",
    ];

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value;
        match key {
            "seed" => self.seed = parse_value(v)?,
            "data.train_count" => self.train_count = parse_value(v)?,
            "data.test_count" => self.test_count = parse_value(v)?,
            "data.image_size" => self.image_size = parse_value(v)?,
            "data.channels" => self.channels = parse_value(v)?,
            "ddpm.timesteps" => self.ddpm_timesteps = parse_value(v)?,
            "ddpm.beta_start" => self.ddpm_beta_start = parse_value(v)?,
            "ddpm.beta_end" => self.ddpm_beta_end = parse_value(v)?,
            "ddpm.steps" => self.ddpm_steps = parse_value(v)?,
            "ddpm.batch" => self.ddpm_batch = parse_value(v)?,
            "ddpm.lr" => self.ddpm_lr = parse_value(v)?,
            "ddpm.ema_decay" => self.ddpm_ema_decay = parse_value(v)?,
            "gan.steps" => self.gan_steps = parse_value(v)?,
            "gan.batch" => self.gan_batch = parse_value(v)?,
            "gan.lr_g" => self.gan_lr_g = parse_value(v)?,
            "gan.lr_d" => self.gan_lr_d = parse_value(v)?,
            "gan.lambda_l1" => self.gan_lambda_l1 = parse_value(v)?,
            "gan.noise_cond_prob" => self.gan_noise_cond_prob = parse_value(v)?,
            "sampler.timesteps" => self.sampler_timesteps = parse_value(v)?,
            "sampler.mode" => self.sampler_mode = parse_value(v)?,
            "sampler.drift_model" => self.sampler_drift = parse_value(v)?,
            "eval.families" => self.eval_families = parse_families(v)?,
            "eval.batch" => self.eval_batch = parse_value(v)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        match key {
            "seed" => self.seed.to_string(),
            "data.train_count" => self.train_count.to_string(),
            "data.test_count" => self.test_count.to_string(),
            "data.image_size" => self.image_size.to_string(),
            "data.channels" => self.channels.to_string(),
            "ddpm.timesteps" => self.ddpm_timesteps.to_string(),
            "ddpm.beta_start" => self.ddpm_beta_start.to_string(),
            "ddpm.beta_end" => self.ddpm_beta_end.to_string(),
            "ddpm.steps" => self.ddpm_steps.to_string(),
            "ddpm.batch" => self.ddpm_batch.to_string(),
            "ddpm.lr" => self.ddpm_lr.to_string(),
            "ddpm.ema_decay" => self.ddpm_ema_decay.to_string(),
            "gan.steps" => self.gan_steps.to_string(),
            "gan.batch" => self.gan_batch.to_string(),
            "gan.lr_g" => self.gan_lr_g.to_string(),
            "gan.lr_d" => self.gan_lr_d.to_string(),
            "gan.lambda_l1" => self.gan_lambda_l1.to_string(),
            "gan.noise_cond_prob" => self.gan_noise_cond_prob.to_string(),
            "sampler.timesteps" => self.sampler_timesteps.to_string(),
            "sampler.mode" => self.sampler_mode.to_string(),
            "sampler.drift_model" => self.sampler_drift.to_string(),
            "eval.families" => self
                .eval_families
                .iter()
                .map(|f| f.name())
                .collect::<Vec<_>>()
                .join(","),
            "eval.batch" => self.eval_batch.to_string(),
            _ => unreachable!("KEYS lists every key"),
        }
    }

    /// Parses `text` on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| Error::Config { line, message };
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let (key, value) = l
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(err(format!("key {key:?} given twice")));
            }
            cfg.set(key, value).map_err(err)?;
            seen.push(key);
        }
        Ok(cfg)
    }

    /// Every key in canonical order; `parse` reproduces `self` exactly.
    pub fn serialize(&self) -> String {
        Self::KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.channels == 1 || self.channels == 3) {
            return Err(Error::invalid("data.channels must be 1 or 3"));
        }
        if self.train_count == 0 || self.test_count == 0 || self.eval_batch == 0 || self.ddpm_batch == 0 {
            return Err(Error::invalid("counts and batch sizes must be positive"));
        }
        if self.image_size < 8 || self.image_size % 4 != 0 {
            return Err(Error::invalid("data.image_size must be a multiple of 4, at least 8"));
        }
        if !(self.ddpm_lr.is_finite() && self.ddpm_lr > 0.0) {
            return Err(Error::invalid("ddpm.lr must be positive"));
        }
        if !(0.0..1.0).contains(&self.ddpm_ema_decay) {
            return Err(Error::invalid("ddpm.ema_decay must lie in [0, 1)"));
        }
        self.schedule()?;
        self.gan_config().validate()
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.ddpm_timesteps, self.ddpm_beta_start, self.ddpm_beta_end)
    }

    pub fn ddpm_config(&self) -> DdpmTrainConfig {
        DdpmTrainConfig {
            steps: self.ddpm_steps,
            batch: self.ddpm_batch,
            lr: self.ddpm_lr,
            ema_decay: self.ddpm_ema_decay,
            seed: self.seed,
        }
    }

    pub fn gan_config(&self) -> GanTrainConfig {
        GanTrainConfig {
            lr_g: self.gan_lr_g,
            lr_d: self.gan_lr_d,
            lambda_l1: self.gan_lambda_l1,
            noise_cond_prob: self.gan_noise_cond_prob,
            batch: self.gan_batch,
            steps: self.gan_steps,
            seed: self.seed,
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            timesteps: self.sampler_timesteps,
            mode: self.sampler_mode,
            drift_model: self.sampler_drift,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_serialize_and_parse_back() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.serialize()).unwrap(), c);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let c = RunConfig::parse("# settings\n\n  gan.steps = 12\nsampler.mode=verbatim\n").unwrap();
        assert_eq!(c.gan_steps, 12);
        assert_eq!(c.sampler_mode, SamplerMode::Verbatim);
    }

    #[test]
    fn bad_lines_name_their_line() {
        for (text, line) in [
            ("seed = 1\nbogus = 3", 2),
            ("gan.steps = -4", 1),
            ("seed 4", 1),
            ("seed = 1\nseed = 2", 2),
            ("eval.families = box,circle", 1),
        ] {
            match RunConfig::parse(text) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    fn finite_f32() -> impl Strategy<Value = f32> {
        prop_oneof![any::<f32>().prop_filter("finite", |v| v.is_finite()), 1e-6f32..1.0]
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(
            seed in any::<u64>(),
            counts in proptest::array::uniform4(0usize..100_000),
            rates in proptest::array::uniform8(finite_f32()),
            steps in proptest::array::uniform3(0usize..10_000),
            verbatim in any::<bool>(),
            eps in any::<bool>(),
            fams in proptest::sample::subsequence(MaskFamily::ALL.to_vec(), 1..=4),
        ) {
            let c = RunConfig {
                seed,
                train_count: counts[0],
                test_count: counts[1],
                image_size: counts[2],
                eval_batch: counts[3],
                ddpm_beta_start: rates[0],
                ddpm_beta_end: rates[1],
                ddpm_lr: rates[2],
                gan_lr_g: rates[3],
                gan_lr_d: rates[4],
                gan_lambda_l1: rates[5],
                gan_noise_cond_prob: rates[6],
                ddpm_ema_decay: rates[7],
                ddpm_steps: steps[0],
                gan_steps: steps[1],
                sampler_timesteps: steps[2],
                sampler_mode: if verbatim { SamplerMode::Verbatim } else { SamplerMode::Stabilized },
                sampler_drift: if eps { DriftRole::EpsilonNet } else { DriftRole::Generator },
                eval_families: fams,
                ..Default::default()
            };
            prop_assert_eq!(RunConfig::parse(&c.serialize()).unwrap(), c);
        }
    }
}
