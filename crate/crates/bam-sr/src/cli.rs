//! Command-line surface: train, eval, infer, bench, count, gradcheck.
//!
//! Configuration is a flat `key=value` UTF-8 text file (`--config`), and
//! every key can be overridden by the flag of the same name. Unknown keys
//! are rejected, and each subcommand validates its complete configuration
//! before doing any work, so bad configs never leave partial outputs.
//! Exit codes: 0 success, 1 check/assert failure, 2 configuration error.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::{self, AttentionKind, AttentionModule, AttentionSpec};
use crate::bench::{run_bench, BenchConfig};
use crate::error::{Error, Result};
use crate::imageio::{quantize_8bit, read_png, write_png};
use crate::metrics::{bicubic_resize, rgb_to_y, Colorspace, Image, MetricReport};
use crate::network::{count_network_flops, count_network_params, Insertion, NetworkSpec, SrNetwork};
use crate::pipeline::{
    self, five_crop_expand, ingest, ingest_paired, load_checkpoint, Dataset, TrainOptions, TrainSpec,
};
use crate::tensor::{grad_check, grad_check_with_injected_fault, Shape, Tensor, Var};

#[derive(Parser)]
#[command(
    name = "bam-sr",
    version,
    about = "Desk-scale single-image super-resolution with balanced attention"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a network and write a checkpoint plus a loss CSV.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a directory of images (Y-channel PSNR/SSIM).
    Eval(EvalArgs),
    /// Upscale one image with a trained checkpoint.
    Infer(InferArgs),
    /// Benchmark forward latency/FPS across attention variants.
    Bench(BenchArgs),
    /// Print parameter and FLOP counts for a configuration.
    Count(CountArgs),
    /// Check reverse-mode gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

/// Flat key=value configuration with typed, consume-on-read access.
/// Anything still present after extraction is an unknown key.
struct Conf {
    map: BTreeMap<String, String>,
}

impl Conf {
    fn new(config: Option<&PathBuf>) -> Result<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|source| Error::Io { path: path.clone(), source })?;
            for (ln, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Error::config(format!(
                        "{}:{}: expected key=value, got `{line}`",
                        path.display(),
                        ln + 1
                    ))
                })?;
                map.insert(k.trim().to_owned(), v.trim().to_owned());
            }
        }
        Ok(Conf { map })
    }

    fn over<T: Display>(&mut self, key: &str, flag: &Option<T>) {
        if let Some(v) = flag {
            self.map.insert(key.to_owned(), v.to_string());
        }
    }

    fn over_path(&mut self, key: &str, flag: &Option<PathBuf>) {
        if let Some(v) = flag {
            self.map.insert(key.to_owned(), v.to_string_lossy().into_owned());
        }
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::config(format!("key `{key}`: invalid value `{raw}`"))),
        }
    }

    fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?
            .ok_or_else(|| Error::config(format!("missing required key `{key}`")))
    }

    fn reject_unknown(self) -> Result<()> {
        if let Some(key) = self.map.keys().next() {
            return Err(Error::config(format!("unknown config key `{key}`")));
        }
        Ok(())
    }
}

fn net_spec_from(conf: &mut Conf) -> Result<NetworkSpec> {
    let blocks = conf.take_or("blocks", 4usize)?;
    let width = conf.take_or("width", 16usize)?;
    let scale = conf.take_or("scale", 2usize)?;
    let kind: AttentionKind = conf.take_or("attention", AttentionKind::Bam)?;
    let reduction = conf.take_or("reduction", 16usize)?;
    let kernel = conf.take_or("kernel", 7usize)?;
    let default_insertion = if kind == AttentionKind::None {
        Insertion::None
    } else {
        Insertion::PerBlock
    };
    let insertion: Insertion = conf.take_or("insertion", default_insertion)?;
    let spec = NetworkSpec {
        blocks,
        width,
        scale,
        attention: AttentionSpec { kind, channels: width, reduction, spatial_kernel: kernel },
        insertion,
    };
    spec.validate().map_err(|e| Error::config(e.to_string()))?;
    Ok(spec)
}

fn train_spec_from(conf: &mut Conf, scale: usize) -> Result<TrainSpec> {
    let spec = TrainSpec {
        patch_size: conf.take_or("patch", 64usize)?,
        batch: conf.take_or("batch", 16usize)?,
        epochs: conf.take_or("epochs", 1000usize)?,
        lr0: conf.take_or("lr0", 1e-4f64)?,
        halve_period: conf.take_or("halve_period", 200usize)?,
        seed: conf.take_or("seed", 0u64)?,
        scale,
    };
    spec.validate().map_err(|e| Error::config(e.to_string()))?;
    Ok(spec)
}

fn require_dir(key: &str, path: &Path) -> Result<()> {
    if !path.is_dir() {
        return Err(Error::config(format!(
            "key `{key}`: `{}` is not a readable directory",
            path.display()
        )));
    }
    Ok(())
}

fn require_file(key: &str, path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::config(format!(
            "key `{key}`: `{}` is not a readable file",
            path.display()
        )));
    }
    Ok(())
}

fn parse_size(raw: &str) -> Result<(usize, usize)> {
    let err = || Error::config(format!("invalid size `{raw}` (expected HxW, e.g. 64x64)"));
    let (h, w) = raw.split_once('x').ok_or_else(err)?;
    let h = h.trim().parse::<usize>().map_err(|_| err())?;
    let w = w.trim().parse::<usize>().map_err(|_| err())?;
    if h == 0 || w == 0 {
        return Err(err());
    }
    Ok((h, w))
}

fn load_dataset(hr_dir: &Path, lr_dir: Option<&PathBuf>, scale: usize) -> Result<Dataset> {
    match lr_dir {
        Some(lr) => ingest_paired(lr, hr_dir, scale),
        None => ingest(hr_dir, scale),
    }
}

// ---------------------------------------------------------------- train

#[derive(Args)]
struct TrainArgs {
    /// Flat key=value config file; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of HR training PNGs.
    #[arg(long = "hr_dir")]
    hr_dir: Option<PathBuf>,
    /// Optional directory of pre-paired LR PNGs (same file names).
    #[arg(long = "lr_dir")]
    lr_dir: Option<PathBuf>,
    /// Output directory for model.ckpt and loss.csv.
    #[arg(long = "out_dir")]
    out_dir: Option<PathBuf>,
    /// Resume from this checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    scale: Option<usize>,
    /// bam | ca | se | cbam | none
    #[arg(long)]
    attention: Option<String>,
    #[arg(long)]
    reduction: Option<usize>,
    #[arg(long)]
    kernel: Option<usize>,
    /// per_block | pre_upsample | both | none
    #[arg(long)]
    insertion: Option<String>,
    /// LR patch size in pixels.
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr0: Option<f64>,
    #[arg(long = "halve_period")]
    halve_period: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Five-crop side fraction in (0, 1].
    #[arg(long = "crop_fraction")]
    crop_fraction: Option<f64>,
    /// Apply the five-crop expansion (default true).
    #[arg(long = "five_crop")]
    five_crop: Option<bool>,
    /// Also checkpoint every N epochs (0 = final epoch only).
    #[arg(long = "checkpoint_period")]
    checkpoint_period: Option<usize>,
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut conf = Conf::new(args.config.as_ref())?;
    conf.over_path("hr_dir", &args.hr_dir);
    conf.over_path("lr_dir", &args.lr_dir);
    conf.over_path("out_dir", &args.out_dir);
    conf.over_path("resume", &args.resume);
    conf.over("blocks", &args.blocks);
    conf.over("width", &args.width);
    conf.over("scale", &args.scale);
    conf.over("attention", &args.attention);
    conf.over("reduction", &args.reduction);
    conf.over("kernel", &args.kernel);
    conf.over("insertion", &args.insertion);
    conf.over("patch", &args.patch);
    conf.over("batch", &args.batch);
    conf.over("epochs", &args.epochs);
    conf.over("lr0", &args.lr0);
    conf.over("halve_period", &args.halve_period);
    conf.over("seed", &args.seed);
    conf.over("crop_fraction", &args.crop_fraction);
    conf.over("five_crop", &args.five_crop);
    conf.over("checkpoint_period", &args.checkpoint_period);

    let net_spec = net_spec_from(&mut conf)?;
    let train_spec = train_spec_from(&mut conf, net_spec.scale)?;
    let hr_dir: PathBuf = conf.require("hr_dir")?;
    let lr_dir: Option<PathBuf> = conf.take("lr_dir")?;
    let out_dir: PathBuf = conf.take_or("out_dir", PathBuf::from("."))?;
    let resume: Option<PathBuf> = conf.take("resume")?;
    let crop_fraction = conf.take_or("crop_fraction", 0.5f64)?;
    let five_crop = conf.take_or("five_crop", true)?;
    let checkpoint_period = conf.take_or("checkpoint_period", 0usize)?;
    conf.reject_unknown()?;

    require_dir("hr_dir", &hr_dir)?;
    if let Some(lr) = &lr_dir {
        require_dir("lr_dir", lr)?;
    }
    if let Some(r) = &resume {
        require_file("resume", r)?;
    }
    if !(crop_fraction > 0.0 && crop_fraction <= 1.0) {
        return Err(Error::config(format!(
            "key `crop_fraction`: must be in (0, 1], got {crop_fraction}"
        )));
    }

    let (mut net, mut state) = match &resume {
        Some(path) => {
            let loaded = load_checkpoint(path)?;
            if loaded.network_spec != net_spec {
                return Err(Error::config(format!(
                    "key `resume`: checkpoint network ({}) disagrees with the configured network; \
                     pass the same config used for the original run",
                    path.display()
                )));
            }
            let stored = loaded.train;
            let same_protocol = stored.patch_size == train_spec.patch_size
                && stored.batch == train_spec.batch
                && stored.lr0 == train_spec.lr0
                && stored.halve_period == train_spec.halve_period
                && stored.seed == train_spec.seed
                && stored.scale == train_spec.scale;
            if !same_protocol {
                return Err(Error::config(
                    "key `resume`: checkpoint training protocol disagrees with the configured one \
                     (only `epochs` may change on resume)",
                ));
            }
            (loaded.net, loaded.state)
        }
        None => (
            SrNetwork::<f32>::build(&net_spec, train_spec.seed)?,
            pipeline::fresh_state(train_spec.seed),
        ),
    };

    let base = load_dataset(&hr_dir, lr_dir.as_ref(), net_spec.scale)?;
    let dataset = if five_crop {
        five_crop_expand(&base, crop_fraction, train_spec.patch_size)?
    } else {
        base
    };

    let attention_params =
        net_spec.attention_sites() * attention::count_params(&net_spec.attention);
    println!(
        "parameters total={} attention={attention_params}",
        count_network_params(&net_spec)
    );
    println!(
        "dataset pairs={} patch={} steps_per_epoch={}",
        dataset.len(),
        train_spec.patch_size,
        dataset.len().div_ceil(train_spec.batch)
    );

    std::fs::create_dir_all(&out_dir)
        .map_err(|source| Error::Io { path: out_dir.clone(), source })?;
    let checkpoint_path = out_dir.join("model.ckpt");
    let options = TrainOptions {
        csv_path: Some(out_dir.join("loss.csv")),
        checkpoint_path: Some(checkpoint_path.clone()),
        checkpoint_period,
        log_epochs: true,
    };
    let report = pipeline::train(&mut net, &dataset, &train_spec, &mut state, &options)?;
    println!(
        "trained {} epochs; checkpoint {}",
        report.records.len(),
        checkpoint_path.display()
    );
    Ok(())
}

// ----------------------------------------------------------------- eval

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Directory of HR reference PNGs.
    #[arg(long = "hr_dir")]
    hr_dir: Option<PathBuf>,
    /// Optional directory of pre-paired LR PNGs.
    #[arg(long = "lr_dir")]
    lr_dir: Option<PathBuf>,
    /// Must match the checkpoint's scale when given.
    #[arg(long)]
    scale: Option<usize>,
    /// Border pixels cropped before metrics (default: the scale).
    #[arg(long)]
    shave: Option<usize>,
    /// Write per-image rows and the mean to this CSV.
    #[arg(long = "out_csv")]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mut conf = Conf::new(args.config.as_ref())?;
    conf.over_path("checkpoint", &args.checkpoint);
    conf.over_path("hr_dir", &args.hr_dir);
    conf.over_path("lr_dir", &args.lr_dir);
    conf.over("scale", &args.scale);
    conf.over("shave", &args.shave);
    conf.over_path("out_csv", &args.out_csv);
    conf.over("seed", &args.seed);

    let checkpoint: PathBuf = conf.require("checkpoint")?;
    let hr_dir: PathBuf = conf.require("hr_dir")?;
    let lr_dir: Option<PathBuf> = conf.take("lr_dir")?;
    let requested_scale: Option<usize> = conf.take("scale")?;
    let shave_conf: Option<usize> = conf.take("shave")?;
    let out_csv: Option<PathBuf> = conf.take("out_csv")?;
    let _seed: Option<u64> = conf.take("seed")?;
    conf.reject_unknown()?;

    require_file("checkpoint", &checkpoint)?;
    require_dir("hr_dir", &hr_dir)?;
    if let Some(lr) = &lr_dir {
        require_dir("lr_dir", lr)?;
    }

    let loaded = load_checkpoint(&checkpoint)?;
    let scale = loaded.network_spec.scale;
    if let Some(req) = requested_scale {
        if req != scale {
            return Err(Error::config(format!(
                "key `scale`: requested {req} but the checkpoint was trained at scale {scale}"
            )));
        }
    }
    let shave = shave_conf.unwrap_or(scale);
    let net = loaded.net.cast::<f64>();

    let dataset = load_dataset(&hr_dir, lr_dir.as_ref(), scale)?;
    let mut rows: Vec<(String, MetricReport, MetricReport)> = Vec::new();
    for (i, (lr, hr)) in dataset.pairs().iter().enumerate() {
        let name = dataset.names().get(i).cloned().unwrap_or_else(|| format!("pair{i}"));
        let sr = net.forward(&Var::constant(lr.tensor().clone()))?;
        let sr_img = quantize_8bit(&Image::new(sr.value().clone(), Colorspace::Rgb)?);
        let bicubic = quantize_8bit(&bicubic_resize(lr, hr.height(), hr.width())?);
        let hr_y = rgb_to_y(hr)?;
        let net_report = MetricReport::measure(&hr_y, &rgb_to_y(&sr_img)?, shave)?;
        let bicubic_report = MetricReport::measure(&hr_y, &rgb_to_y(&bicubic)?, shave)?;
        println!(
            "{name} net {} bicubic {}",
            net_report.column(),
            bicubic_report.column()
        );
        rows.push((name, net_report, bicubic_report));
    }
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&(String, MetricReport, MetricReport)) -> f64| -> f64 {
        rows.iter().map(|r| f(r)).sum::<f64>() / n
    };
    let mean_net = MetricReport {
        psnr_db: mean(&|r| r.1.psnr_db),
        ssim: mean(&|r| r.1.ssim),
        border_shave: shave,
    };
    let mean_bicubic = MetricReport {
        psnr_db: mean(&|r| r.2.psnr_db),
        ssim: mean(&|r| r.2.ssim),
        border_shave: shave,
    };
    println!("mean net {} bicubic {}", mean_net.column(), mean_bicubic.column());

    if let Some(path) = out_csv {
        let mut csv = String::from(
            "image,psnr_db,ssim,psnr_ssim,bicubic_psnr_db,bicubic_ssim,bicubic_psnr_ssim\n",
        );
        for (name, net_r, bi_r) in &rows {
            csv.push_str(&format!(
                "{name},{},{},{},{},{},{}\n",
                net_r.psnr_db,
                net_r.ssim,
                net_r.column(),
                bi_r.psnr_db,
                bi_r.ssim,
                bi_r.column()
            ));
        }
        csv.push_str(&format!(
            "mean,{},{},{},{},{},{}\n",
            mean_net.psnr_db,
            mean_net.ssim,
            mean_net.column(),
            mean_bicubic.psnr_db,
            mean_bicubic.ssim,
            mean_bicubic.column()
        ));
        std::fs::write(&path, csv).map_err(|source| Error::Io { path, source })?;
    }
    Ok(())
}

// ---------------------------------------------------------------- infer

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Input PNG to upscale.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output PNG path.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn cmd_infer(args: InferArgs) -> Result<()> {
    let mut conf = Conf::new(args.config.as_ref())?;
    conf.over_path("checkpoint", &args.checkpoint);
    conf.over_path("input", &args.input);
    conf.over_path("output", &args.output);
    conf.over("seed", &args.seed);

    let checkpoint: PathBuf = conf.require("checkpoint")?;
    let input: PathBuf = conf.require("input")?;
    let output: PathBuf = conf.require("output")?;
    let _seed: Option<u64> = conf.take("seed")?;
    conf.reject_unknown()?;

    require_file("checkpoint", &checkpoint)?;
    let loaded = load_checkpoint(&checkpoint)?;
    let net = loaded.net.cast::<f64>();
    let image = read_png(&input)?;
    let sr = net.forward(&Var::constant(image.tensor().clone()))?;
    let sr_img = Image::new(sr.value().clone(), Colorspace::Rgb)?;
    write_png(&output, &sr_img)?;
    println!(
        "wrote {} ({}x{} -> {}x{})",
        output.display(),
        image.width(),
        image.height(),
        sr_img.width(),
        sr_img.height()
    );
    Ok(())
}

// ---------------------------------------------------------------- bench

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated attention kinds, e.g. bam,cbam,none.
    #[arg(long)]
    variants: Option<String>,
    /// Comma-separated input sizes, e.g. 64x64,128x128,200x200.
    #[arg(long)]
    sizes: Option<String>,
    /// Timed frames per cell (>= 20).
    #[arg(long)]
    frames: Option<usize>,
    /// Warm-up frames excluded from timing (>= 5).
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    scale: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report table to this CSV.
    #[arg(long = "out_csv")]
    out_csv: Option<PathBuf>,
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let mut conf = Conf::new(args.config.as_ref())?;
    conf.over("variants", &args.variants);
    conf.over("sizes", &args.sizes);
    conf.over("frames", &args.frames);
    conf.over("warmup", &args.warmup);
    conf.over("blocks", &args.blocks);
    conf.over("width", &args.width);
    conf.over("scale", &args.scale);
    conf.over("seed", &args.seed);
    conf.over_path("out_csv", &args.out_csv);

    let variants_raw = conf.take_or("variants", "bam,ca,se,cbam,none".to_owned())?;
    let sizes_raw = conf.take_or("sizes", "64x64,128x128,200x200".to_owned())?;
    let config = BenchConfig {
        variants: variants_raw
            .split(',')
            .map(|s| AttentionKind::from_str(s.trim()).map_err(|e| Error::config(e.to_string())))
            .collect::<Result<Vec<_>>>()?,
        sizes: sizes_raw
            .split(',')
            .map(|s| parse_size(s.trim()))
            .collect::<Result<Vec<_>>>()?,
        frames: conf.take_or("frames", 700usize)?,
        warmup: conf.take_or("warmup", 5usize)?,
        blocks: conf.take_or("blocks", 4usize)?,
        width: conf.take_or("width", 16usize)?,
        scale: conf.take_or("scale", 2usize)?,
        seed: conf.take_or("seed", 0u64)?,
    };
    let out_csv: Option<PathBuf> = conf.take("out_csv")?;
    conf.reject_unknown()?;
    config.validate().map_err(|e| Error::config(e.to_string()))?;

    let reports = run_bench(&config)?;
    println!("variant size frames total_s fps median_ms p90_ms");
    let mut csv = String::from("variant,height,width,frames,total_seconds,fps,median_ms,p90_ms\n");
    for r in &reports {
        println!(
            "{} {}x{} {} {:.3} {:.2} {:.3} {:.3}",
            r.kind, r.input.0, r.input.1, r.frames, r.total_seconds, r.fps, r.median_ms, r.p90_ms
        );
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.kind, r.input.0, r.input.1, r.frames, r.total_seconds, r.fps, r.median_ms, r.p90_ms
        ));
    }
    if let Some(path) = out_csv {
        std::fs::write(&path, csv).map_err(|source| Error::Io { path, source })?;
    }
    Ok(())
}

// ---------------------------------------------------------------- count

#[derive(Args)]
struct CountArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    scale: Option<usize>,
    #[arg(long)]
    attention: Option<String>,
    #[arg(long)]
    reduction: Option<usize>,
    #[arg(long)]
    kernel: Option<usize>,
    #[arg(long)]
    insertion: Option<String>,
    /// Input size the FLOP counts assume, e.g. 64x64 or 240x360.
    #[arg(long = "input_size")]
    input_size: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

fn cmd_count(args: CountArgs) -> Result<()> {
    let mut conf = Conf::new(args.config.as_ref())?;
    conf.over("blocks", &args.blocks);
    conf.over("width", &args.width);
    conf.over("scale", &args.scale);
    conf.over("attention", &args.attention);
    conf.over("reduction", &args.reduction);
    conf.over("kernel", &args.kernel);
    conf.over("insertion", &args.insertion);
    conf.over("input_size", &args.input_size);
    conf.over("seed", &args.seed);

    let spec = net_spec_from(&mut conf)?;
    let size_raw = conf.take_or("input_size", "64x64".to_owned())?;
    let _seed: Option<u64> = conf.take("seed")?;
    conf.reject_unknown()?;
    let (h, w) = parse_size(&size_raw)?;

    let a = &spec.attention;
    println!(
        "attention kind={} channels={} reduction={} kernel={}",
        a.kind, a.channels, a.reduction, a.spatial_kernel
    );
    println!("attention params {}", attention::count_params(a));
    println!("attention flops {} at {h}x{w}", attention::count_flops(a, h, w));
    println!(
        "host blocks={} width={} scale={} insertion={}",
        spec.blocks, spec.width, spec.scale, spec.insertion
    );
    println!("host params {}", count_network_params(&spec));
    println!("host flops {} at {h}x{w}", count_network_flops(&spec, h, w));
    Ok(())
}

// ------------------------------------------------------------ gradcheck

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Central-difference half-width.
    #[arg(long)]
    step: Option<f64>,
    /// Worst relative error allowed.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Test hook: corrupt the first reverse-mode gradient coordinate of the
    /// first target by this amount (must make the run fail).
    #[arg(long = "inject_fault")]
    inject_fault: Option<f64>,
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<()> {
    let mut conf = Conf::new(args.config.as_ref())?;
    conf.over("seed", &args.seed);
    conf.over("step", &args.step);
    conf.over("tolerance", &args.tolerance);
    conf.over("inject_fault", &args.inject_fault);

    let seed = conf.take_or("seed", 0u64)?;
    let step = conf.take_or("step", 1e-5f64)?;
    let tolerance = conf.take_or("tolerance", 1e-5f64)?;
    let fault: Option<f64> = conf.take("inject_fault")?;
    conf.reject_unknown()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results: Vec<(String, f64)> = Vec::new();

    for (i, kind) in [AttentionKind::Bam, AttentionKind::Ca, AttentionKind::Se, AttentionKind::Cbam]
        .into_iter()
        .enumerate()
    {
        let spec = AttentionSpec::new(kind, 8);
        let module = AttentionModule::<f64>::new(spec, "", &mut rng)?;
        let input = Tensor::rand_uniform(Shape::new(2, 8, 12, 10), 0.0, 1.0, &mut rng);
        let f = |x: &Var<f64>| -> Result<Var<f64>> { Ok(module.forward(x)?.sum()) };
        let worst = match (i, fault) {
            (0, Some(delta)) => grad_check_with_injected_fault(f, &input, step, delta)?,
            _ => grad_check(f, &input, step)?,
        };
        println!("gradcheck {kind} worst_rel_error {worst:e}");
        results.push((kind.to_string(), worst));
    }

    let host_spec = NetworkSpec::plain(1, 8, 2).with_attention(AttentionKind::Bam, Insertion::PerBlock);
    let net = SrNetwork::<f64>::build(&host_spec, seed)?;
    let input = Tensor::rand_uniform(Shape::new(2, 3, 12, 10), 0.0, 1.0, &mut rng);
    let f = |x: &Var<f64>| -> Result<Var<f64>> { Ok(net.forward(x)?.sum()) };
    let worst = grad_check(f, &input, step)?;
    println!("gradcheck host worst_rel_error {worst:e}");
    results.push(("host".to_owned(), worst));

    let (worst_name, worst_err) = results
        .iter()
        .max_by(|a, b| a.1.partial_cmp(&b.1).expect("errors are finite"))
        .expect("at least one target ran")
        .clone();
    if worst_err > tolerance {
        return Err(Error::CheckFailed {
            msg: format!(
                "gradient check failed at `{worst_name}`: worst relative error {worst_err:e} > {tolerance:e}"
            ),
        });
    }
    println!("gradcheck pass (worst {worst_err:e} at {worst_name})");
    Ok(())
}

// ------------------------------------------------------------------ run

/// Parses arguments, dispatches, and maps errors to exit codes
/// (0 success, 1 runtime/check failure, 2 configuration error).
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Train(a) => cmd_train(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Infer(a) => cmd_infer(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Count(a) => cmd_count(a),
        Cmd::Gradcheck(a) => cmd_gradcheck(a),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config { .. } => 2,
                _ => 1,
            }
        }
    }
}
