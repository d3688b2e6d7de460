//! `dgpaint` command-line front end.
//!
//! Every subcommand takes `--seed` and `--config`; values from the config file
//! are applied first and explicit flags override them. Files are written
//! atomically.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use inpaint_core::data::{
    apply_mask, gen_toyshapes, load_image, load_mask, montage, save_image, save_mask, toyshape, DatasetSpec, Image,
    Mask, MaskFamily, Palette,
};
use inpaint_core::diffusion::{ddpm_inpaint_baseline, train_ddpm, EpsilonNet};
use inpaint_core::eval::{load_model, run_eval, save_model, DdpmModel, EvalSetup, RunConfig};
use inpaint_core::fsutil::write_atomic;
use inpaint_core::gan::{train_gan, Discriminator, Generator};
use inpaint_core::numerics::Rng;
use inpaint_core::sampler::{diffganpaint_inpaint_batch, DriftModel, DriftRole, EpsilonDrift, SamplerMode};

#[derive(Debug, Parser)]
#[command(name = "dgpaint", version, about = "Diffusion-loop GAN inpainting on small images")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Settings file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a toyshapes dataset as `train/` and `test/` directories of PPM files.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        train: Option<usize>,
        #[arg(long)]
        test: Option<usize>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        channels: Option<usize>,
    },
    /// Write one mask of the given family as a PGM file.
    GenMask {
        #[arg(long)]
        family: MaskFamily,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        size: Option<usize>,
        /// Selects one of the seed's masks.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Train the epsilon network on a directory of images.
    TrainDdpm {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Train the generator and discriminator on a directory of images.
    TrainGan {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also save the discriminator here.
        #[arg(long)]
        disc_out: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Inpaint one image with the generator-driven denoising loop.
    Inpaint {
        #[command(flatten)]
        io: InpaintIo,
        #[arg(long)]
        gan: PathBuf,
        /// Epsilon network, needed when the loop is driven by it.
        #[arg(long)]
        ddpm: Option<PathBuf>,
        /// Loop steps.
        #[arg(long = "T")]
        timesteps: Option<usize>,
        #[arg(long)]
        mode: Option<SamplerMode>,
        #[arg(long)]
        drift_model: Option<DriftRole>,
    },
    /// Inpaint one image with mask-projected DDPM sampling.
    BaselineInpaint {
        #[command(flatten)]
        io: InpaintIo,
        #[arg(long)]
        ddpm: PathBuf,
    },
    /// Sweep mask families and methods over a test directory and write a CSV report.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        gan: PathBuf,
        #[arg(long)]
        ddpm: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated mask families.
        #[arg(long)]
        families: Option<String>,
        /// Use only the first N images.
        #[arg(long)]
        samples: Option<usize>,
        /// Fill the wall_ms column; the report is then no longer reproducible byte for byte.
        #[arg(long)]
        record_time: bool,
    },
}

#[derive(Debug, Args)]
struct InpaintIo {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Original | masked input | result strip.
    #[arg(long)]
    montage: Option<PathBuf>,
}

/// Runs the CLI on `argv` (program name first) and returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunConfig::parse(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::GenData {
            out,
            train,
            test,
            size,
            channels,
        } => {
            cfg.train_count = train.unwrap_or(cfg.train_count);
            cfg.test_count = test.unwrap_or(cfg.test_count);
            cfg.image_size = size.unwrap_or(cfg.image_size);
            cfg.channels = channels.unwrap_or(cfg.channels);
            cfg.validate()?;
            gen_data(&cfg, &out)
        }
        Command::GenMask {
            family,
            out,
            size,
            index,
        } => {
            let size = size.unwrap_or(cfg.image_size);
            let mut rng = Rng::new(cfg.seed).split("gen-mask").split_index(index);
            let mask = family.sample(&mut rng, size, size)?;
            save_mask(&mask, &out)?;
            println!("{family} mask, {:.1}% holes -> {}", mask.coverage() * 100.0, out.display());
            Ok(())
        }
        Command::TrainDdpm { data, out, steps } => {
            cfg.ddpm_steps = steps.unwrap_or(cfg.ddpm_steps);
            cfg.validate()?;
            train_ddpm_cmd(&cfg, &data, &out)
        }
        Command::TrainGan {
            data,
            out,
            disc_out,
            steps,
        } => {
            cfg.gan_steps = steps.unwrap_or(cfg.gan_steps);
            cfg.validate()?;
            train_gan_cmd(&cfg, &data, &out, disc_out.as_deref())
        }
        Command::Inpaint {
            io,
            gan,
            ddpm,
            timesteps,
            mode,
            drift_model,
        } => {
            cfg.sampler_timesteps = timesteps.unwrap_or(cfg.sampler_timesteps);
            cfg.sampler_mode = mode.unwrap_or(cfg.sampler_mode);
            cfg.sampler_drift = drift_model.unwrap_or(cfg.sampler_drift);
            inpaint_cmd(&cfg, &io, &gan, ddpm.as_deref())
        }
        Command::BaselineInpaint { io, ddpm } => baseline_cmd(&cfg, &io, &ddpm),
        Command::Eval {
            data,
            gan,
            ddpm,
            out,
            families,
            samples,
            record_time,
        } => {
            if let Some(f) = families {
                cfg.set("eval.families", &f).map_err(anyhow::Error::msg)?;
            }
            eval_cmd(&cfg, &data, &gan, &ddpm, &out, samples, record_time)
        }
    }
}

fn image_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("{index:05}.ppm"))
}

fn gen_data(cfg: &RunConfig, out: &Path) -> Result<()> {
    let mut spec = DatasetSpec::new(cfg.train_count, cfg.image_size, cfg.seed);
    spec.palette = if cfg.channels == 1 { Palette::Gray } else { Palette::Rgb };
    let (train_dir, test_dir) = (out.join("train"), out.join("test"));
    for d in [&train_dir, &test_dir] {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    for (i, img) in gen_toyshapes(&spec)?.iter().enumerate() {
        save_image(img, image_path(&train_dir, i))?;
    }
    // Test images continue the same index stream past the training split.
    for i in 0..cfg.test_count {
        save_image(&toyshape(&spec, cfg.train_count + i)?, image_path(&test_dir, i))?;
    }
    println!(
        "wrote {} training and {} test images to {}",
        cfg.train_count,
        cfg.test_count,
        out.display()
    );
    Ok(())
}

/// Loads every `.ppm`/`.pgm` file in `dir`, in file-name order.
fn load_dir(dir: &Path) -> Result<Vec<Image>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("ppm" | "pgm")));
    paths.sort();
    if paths.is_empty() {
        bail!("no .ppm or .pgm images in {}", dir.display());
    }
    let images = paths
        .iter()
        .map(|p| load_image(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    if images.iter().any(|i| !i.same_dims(&images[0])) {
        bail!("images in {} differ in size", dir.display());
    }
    Ok(images)
}

fn train_ddpm_cmd(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let images = load_dir(data)?;
    let schedule = cfg.schedule()?;
    let mut net = EpsilonNet::new(images[0].channels(), &Rng::new(cfg.seed))?;
    let start = Instant::now();
    let losses = train_ddpm(&mut net, &images, &schedule, &cfg.ddpm_config(), |i, l| {
        if (i + 1) % 250 == 0 {
            eprintln!("ddpm step {:>5}  loss {l:.4}", i + 1);
        }
    })?;
    save_model(out, &DdpmModel { net, schedule })?;
    println!(
        "trained epsilon net for {} steps in {:.1}s, final loss {:.4} -> {}",
        losses.len(),
        start.elapsed().as_secs_f64(),
        tail_mean(&losses),
        out.display()
    );
    Ok(())
}

fn tail_mean(v: &[f32]) -> f32 {
    let k = v.len().min(50);
    v[v.len() - k..].iter().sum::<f32>() / k.max(1) as f32
}

fn train_gan_cmd(cfg: &RunConfig, data: &Path, out: &Path, disc_out: Option<&Path>) -> Result<()> {
    let images = load_dir(data)?;
    let schedule = cfg.schedule()?;
    let root = Rng::new(cfg.seed);
    let c = images[0].channels();
    let mut g = Generator::new(c, &root)?;
    let mut d = Discriminator::new(c, &root)?;
    let start = Instant::now();
    let history = train_gan(&mut g, &mut d, &images, &schedule, &cfg.gan_config(), |i, l| {
        if (i + 1) % 250 == 0 {
            eprintln!(
                "gan step {:>5}  g {:.4}  d {:.4}  l1 {:.4}",
                i + 1,
                l.generator,
                l.discriminator,
                l.l1
            );
        }
    })?;
    save_model(out, &g)?;
    if let Some(p) = disc_out {
        save_model(p, &d)?;
    }
    let l1: Vec<f32> = history.iter().map(|l| l.l1).collect();
    println!(
        "trained GAN for {} steps in {:.1}s, final l1 {:.4} -> {}",
        history.len(),
        start.elapsed().as_secs_f64(),
        tail_mean(&l1),
        out.display()
    );
    Ok(())
}

fn load_pair(io: &InpaintIo) -> Result<(Image, Mask)> {
    let image = load_image(&io.image).with_context(|| format!("loading {}", io.image.display()))?;
    let mask = load_mask(&io.mask).with_context(|| format!("loading {}", io.mask.display()))?;
    if (image.height(), image.width()) != (mask.height(), mask.width()) {
        bail!(
            "image is {}x{} but mask is {}x{}",
            image.height(),
            image.width(),
            mask.height(),
            mask.width()
        );
    }
    Ok((image, mask))
}

fn write_outputs(io: &InpaintIo, image: &Image, mask: &Mask, result: &Image) -> Result<()> {
    save_image(result, &io.out)?;
    if let Some(p) = &io.montage {
        save_image(&montage(image, &apply_mask(image, mask)?, result)?, p)?;
    }
    Ok(())
}

fn inpaint_cmd(cfg: &RunConfig, io: &InpaintIo, gan: &Path, ddpm: Option<&Path>) -> Result<()> {
    let (image, mask) = load_pair(io)?;
    let g: Generator = load_model(gan).with_context(|| format!("loading {}", gan.display()))?;
    let sampler = cfg.sampler_config();
    let ddpm_model: Option<DdpmModel> = match (sampler.drift_model, ddpm) {
        (DriftRole::EpsilonNet, Some(p)) => Some(load_model(p).with_context(|| format!("loading {}", p.display()))?),
        (DriftRole::EpsilonNet, None) => bail!("--drift-model epsilon_net needs --ddpm"),
        (DriftRole::Generator, _) => None,
    };
    let eps_drift = ddpm_model.as_ref().map(|m| EpsilonDrift {
        net: &m.net,
        schedule: &m.schedule,
    });
    let loop_model: &dyn DriftModel = match &eps_drift {
        Some(e) => e,
        None => &g,
    };
    let mut rngs = [Rng::new(cfg.seed).split("inpaint")];
    let (mut results, trace) = diffganpaint_inpaint_batch(
        std::slice::from_ref(&image),
        std::slice::from_ref(&mask),
        &g,
        loop_model,
        &sampler,
        &mut rngs,
    )?;
    let result = results.remove(0);
    write_outputs(io, &image, &mask, &result)?;
    println!(
        "inpainted {} ({} mode, T={}): {} generator and {} epsilon-net evaluations -> {}",
        io.image.display(),
        sampler.mode,
        sampler.timesteps,
        trace.generator_evals,
        trace.epsilon_net_evals,
        io.out.display()
    );
    Ok(())
}

fn baseline_cmd(cfg: &RunConfig, io: &InpaintIo, ddpm: &Path) -> Result<()> {
    let (image, mask) = load_pair(io)?;
    let m: DdpmModel = load_model(ddpm).with_context(|| format!("loading {}", ddpm.display()))?;
    let mut rng = Rng::new(cfg.seed).split("baseline-inpaint");
    let (result, trace) = ddpm_inpaint_baseline(&m.net, &image, &mask, &m.schedule, &mut rng)?;
    write_outputs(io, &image, &mask, &result)?;
    println!(
        "inpainted {} with {} epsilon-net evaluations -> {}",
        io.image.display(),
        trace.epsilon_net_evals,
        io.out.display()
    );
    Ok(())
}

fn eval_cmd(
    cfg: &RunConfig,
    data: &Path,
    gan: &Path,
    ddpm: &Path,
    out: &Path,
    samples: Option<usize>,
    record_time: bool,
) -> Result<()> {
    let mut images = load_dir(data)?;
    if let Some(n) = samples {
        images.truncate(n);
    }
    let g: Generator = load_model(gan).with_context(|| format!("loading {}", gan.display()))?;
    let m: DdpmModel = load_model(ddpm).with_context(|| format!("loading {}", ddpm.display()))?;
    let setup = EvalSetup {
        generator: &g,
        ddpm: &m.net,
        schedule: &m.schedule,
        sampler: cfg.sampler_config(),
        families: cfg.eval_families.clone(),
        batch: cfg.eval_batch,
        record_time,
    };
    let report = run_eval(&images, &setup, cfg.seed)?;
    write_atomic(out, report.to_csv().as_bytes())?;
    println!("{:<10} {:<14} {:>12} {:>9} {:>11} {:>8}", "family", "method", "masked_mse", "psnr", "beats_fill", "evals");
    for s in report.summary() {
        println!(
            "{:<10} {:<14} {:>12.6} {:>9.3} {:>10.1}% {:>8}",
            s.family.name(),
            s.method.name(),
            s.mean_masked_mse,
            s.mean_psnr,
            s.beats_mean_fill * 100.0,
            s.evals_per_sample
        );
    }
    println!("{} rows -> {}", report.rows.len(), out.display());
    Ok(())
}
