use std::fmt::Write as _;
use std::time::Duration;

use crate::data::{apply_mask, mean_fill, Image, Mask, MaskFamily};
use crate::diffusion::{ddpm_inpaint_batch, EpsilonNet, NoiseSchedule};
use crate::error::{Error, Result};
use crate::eval::{masked_mse, psnr};
use crate::gan::Generator;
use crate::numerics::Rng;
use crate::sampler::{diffganpaint_inpaint_batch, DriftModel, DriftRole, EpsilonDrift, SamplerConfig};
use crate::trace::SampleTrace;

pub const CSV_HEADER: &str =
    "sample_id,mask_family,method,masked_mse,psnr,generator_evals,epsilon_net_evals,wall_ms";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    DiffGanPaint,
    DdpmBaseline,
    MeanFill,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::DiffGanPaint, Method::DdpmBaseline, Method::MeanFill];

    pub fn name(self) -> &'static str {
        match self {
            Method::DiffGanPaint => "diffganpaint",
            Method::DdpmBaseline => "ddpm_baseline",
            Method::MeanFill => "mean_fill",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub sample_id: usize,
    pub family: MaskFamily,
    pub method: Method,
    pub masked_mse: f64,
    pub psnr: f64,
    pub generator_evals: u64,
    pub epsilon_net_evals: u64,
    /// Per-sample share of the batch's wall time, if timing was recorded.
    pub wall: Option<Duration>,
}

/// Rows ordered by sample id, then mask family, then method.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

/// Mean masked MSE of one method on one family, and how often it beat mean-fill.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub family: MaskFamily,
    pub method: Method,
    pub samples: usize,
    pub mean_masked_mse: f64,
    pub mean_psnr: f64,
    /// Fraction of samples with masked MSE strictly below mean-fill's.
    pub beats_mean_fill: f64,
    pub evals_per_sample: f64,
}

impl EvalReport {
    /// CSV with the fixed [`CSV_HEADER`]. `wall_ms` is `0` for rows without timing.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let wall = r.wall.map_or(0.0, |d| d.as_secs_f64() * 1e3);
            writeln!(
                s,
                "{},{},{},{:.8},{:.4},{},{},{:.3}",
                r.sample_id,
                r.family,
                r.method.name(),
                r.masked_mse,
                r.psnr,
                r.generator_evals,
                r.epsilon_net_evals,
                wall
            )
            .expect("writing to a String");
        }
        s
    }

    fn find(&self, id: usize, family: MaskFamily, method: Method) -> Option<&EvalRow> {
        self.rows
            .iter()
            .find(|r| r.sample_id == id && r.family == family && r.method == method)
    }

    pub fn summary(&self) -> Vec<MethodSummary> {
        let mut out = Vec::new();
        for family in MaskFamily::ALL {
            for method in Method::ALL {
                let rows: Vec<&EvalRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.family == family && r.method == method)
                    .collect();
                if rows.is_empty() {
                    continue;
                }
                let n = rows.len() as f64;
                let wins = rows
                    .iter()
                    .filter(|r| {
                        self.find(r.sample_id, family, Method::MeanFill)
                            .is_some_and(|m| r.masked_mse < m.masked_mse)
                    })
                    .count();
                out.push(MethodSummary {
                    family,
                    method,
                    samples: rows.len(),
                    mean_masked_mse: rows.iter().map(|r| r.masked_mse).sum::<f64>() / n,
                    mean_psnr: rows.iter().map(|r| r.psnr).sum::<f64>() / n,
                    beats_mean_fill: wins as f64 / n,
                    evals_per_sample: rows
                        .iter()
                        .map(|r| (r.generator_evals + r.epsilon_net_evals) as f64)
                        .sum::<f64>()
                        / n,
                });
            }
        }
        out
    }
}

/// Models and settings for an evaluation sweep.
pub struct EvalSetup<'a> {
    pub generator: &'a Generator,
    pub ddpm: &'a EpsilonNet,
    pub schedule: &'a NoiseSchedule,
    pub sampler: SamplerConfig,
    pub families: Vec<MaskFamily>,
    pub batch: usize,
    pub record_time: bool,
}

#[allow(clippy::too_many_arguments)]
fn rows_for(
    ids: &[usize],
    family: MaskFamily,
    method: Method,
    originals: &[&Image],
    masks: &[Mask],
    results: &[Image],
    trace: &SampleTrace,
    record_time: bool,
) -> Result<Vec<EvalRow>> {
    let share = trace.wall / ids.len() as u32;
    ids.iter()
        .enumerate()
        .map(|(k, &id)| {
            Ok(EvalRow {
                sample_id: id,
                family,
                method,
                masked_mse: masked_mse(&results[k], originals[k], &masks[k])?,
                psnr: psnr(&results[k], originals[k])?,
                generator_evals: trace.generator_evals,
                epsilon_net_evals: trace.epsilon_net_evals,
                wall: record_time.then_some(share),
            })
        })
        .collect()
}

/// Sweeps mask families × methods over `images`. Masks and sampler streams are
/// derived from `seed`, the family, and the sample id alone, so the report does
/// not depend on the batch size.
pub fn run_eval(images: &[Image], setup: &EvalSetup<'_>, seed: u64) -> Result<EvalReport> {
    if images.is_empty() {
        return Err(Error::invalid("no test images"));
    }
    if setup.batch == 0 {
        return Err(Error::invalid("evaluation batch size must be positive"));
    }
    let root = Rng::new(seed).split("eval");
    let eps_drift = EpsilonDrift {
        net: setup.ddpm,
        schedule: setup.schedule,
    };
    let loop_model: &dyn DriftModel = match setup.sampler.drift_model {
        DriftRole::Generator => setup.generator,
        DriftRole::EpsilonNet => &eps_drift,
    };
    let mut rows = Vec::new();
    for &family in &setup.families {
        let streams = |label: &str, ids: &[usize]| -> Vec<Rng> {
            let base = root.split(label).split(family.name());
            ids.iter().map(|&i| base.split_index(i as u64)).collect()
        };
        let ids_all: Vec<usize> = (0..images.len()).collect();
        for ids in ids_all.chunks(setup.batch) {
            let originals: Vec<&Image> = ids.iter().map(|&i| &images[i]).collect();
            let (h, w) = (originals[0].height(), originals[0].width());
            let masks = streams("masks", ids)
                .iter_mut()
                .map(|r| family.sample(r, h, w))
                .collect::<Result<Vec<_>>>()?;
            let inputs: Vec<Image> = originals.iter().copied().cloned().collect();

            let mut rngs = streams("diffganpaint", ids);
            let (res, trace) =
                diffganpaint_inpaint_batch(&inputs, &masks, setup.generator, loop_model, &setup.sampler, &mut rngs)?;
            rows.extend(rows_for(ids, family, Method::DiffGanPaint, &originals, &masks, &res, &trace, setup.record_time)?);

            let mut rngs = streams("ddpm", ids);
            let (res, trace) = ddpm_inpaint_batch(setup.ddpm, &inputs, &masks, setup.schedule, &mut rngs)?;
            rows.extend(rows_for(ids, family, Method::DdpmBaseline, &originals, &masks, &res, &trace, setup.record_time)?);

            let start = std::time::Instant::now();
            let res = originals
                .iter()
                .zip(&masks)
                .map(|(img, m)| mean_fill(&apply_mask(img, m)?, m))
                .collect::<Result<Vec<_>>>()?;
            let trace = SampleTrace {
                wall: start.elapsed(),
                ..Default::default()
            };
            rows.extend(rows_for(ids, family, Method::MeanFill, &originals, &masks, &res, &trace, setup.record_time)?);
        }
    }
    let family_rank = |f: MaskFamily| setup.families.iter().position(|&x| x == f);
    rows.sort_by_key(|r| (r.sample_id, family_rank(r.family), r.method));
    Ok(EvalReport { rows })
}
