//! Training protocol end to end: dataset ingestion, five-crop expansion,
//! aligned patch sampling with dihedral augmentation, L1/Adam optimization on
//! a halving learning-rate schedule, and checkpointing.
//!
//! Determinism is a first-class requirement: given (seed, spec, dataset) the
//! loss trace is reproducible bit for bit. All random draws go through one
//! seeded ChaCha8 stream in a fixed order (image, row, column, transform per
//! sample), the optimizer walks parameters in enumeration order, and tensor
//! kernels use fixed accumulation orders.

pub mod adam;
pub mod checkpoint;

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imageio::read_png;
use crate::metrics::{bicubic_resize, Image};
use crate::network::SrNetwork;
use crate::params::ParamSet;
use crate::tensor::{l1_loss, Element, Shape, Tensor, Var};

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, save_checkpoint, LoadedCheckpoint, TrainState};

/// Training hyper-parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSpec {
    /// Square patch side in LR pixels.
    pub patch_size: usize,
    pub batch: usize,
    pub epochs: usize,
    /// Initial learning rate.
    pub lr0: f64,
    /// Epochs between learning-rate halvings.
    pub halve_period: usize,
    pub seed: u64,
    pub scale: usize,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            patch_size: 64,
            batch: 16,
            epochs: 1000,
            lr0: 1e-4,
            halve_period: 200,
            seed: 0,
            scale: 2,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 {
            return Err(Error::invalid("TrainSpec", "patch_size must be >= 1"));
        }
        if self.batch == 0 {
            return Err(Error::invalid("TrainSpec", "batch must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("TrainSpec", "epochs must be >= 1"));
        }
        if self.halve_period == 0 {
            return Err(Error::invalid("TrainSpec", "halve_period must be >= 1"));
        }
        if !matches!(self.scale, 2 | 3 | 4) {
            return Err(Error::invalid("TrainSpec", "scale must be 2, 3, or 4"));
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return Err(Error::invalid("TrainSpec", "lr0 must be positive and finite"));
        }
        Ok(())
    }
}

/// Aligned (LR, HR) image pairs at one scale.
#[derive(Debug)]
pub struct Dataset {
    pairs: Vec<(Image, Image)>,
    names: Vec<String>,
    scale: usize,
}

impl Dataset {
    /// Wraps explicit pairs, checking that every HR image is exactly
    /// `scale` times its LR partner. Pairs are named `pair0`, `pair1`, ...
    pub fn from_pairs(pairs: Vec<(Image, Image)>, scale: usize) -> Result<Self> {
        let names = (0..pairs.len()).map(|i| format!("pair{i}")).collect();
        Self::from_named_pairs(pairs, names, scale)
    }

    /// Like [`Dataset::from_pairs`] but with one display name per pair
    /// (reports and eval rows use these).
    pub fn from_named_pairs(
        pairs: Vec<(Image, Image)>,
        names: Vec<String>,
        scale: usize,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Dataset { msg: "dataset has no image pairs".into() });
        }
        if names.len() != pairs.len() {
            return Err(Error::Dataset {
                msg: format!("{} names for {} pairs", names.len(), pairs.len()),
            });
        }
        for (i, (lr, hr)) in pairs.iter().enumerate() {
            if hr.height() != scale * lr.height() || hr.width() != scale * lr.width() {
                return Err(Error::Dataset {
                    msg: format!(
                        "pair {i}: HR {}x{} is not {scale}x the LR {}x{}",
                        hr.height(),
                        hr.width(),
                        lr.height(),
                        lr.width()
                    ),
                });
            }
        }
        Ok(Dataset { pairs, names, scale })
    }

    pub fn pairs(&self) -> &[(Image, Image)] {
        &self.pairs
    }
    pub fn names(&self) -> &[String] {
        &self.names
    }
    pub fn scale(&self) -> usize {
        self.scale
    }
    pub fn len(&self) -> usize {
        self.pairs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Smallest LR side over the whole set (bounds the usable patch size).
    pub fn min_lr_side(&self) -> usize {
        self.pairs
            .iter()
            .map(|(lr, _)| lr.height().min(lr.width()))
            .min()
            .unwrap_or(0)
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

fn png_paths_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

/// Builds LR images by centered cropping each HR to a multiple of `scale`
/// and bicubic-downscaling (antialiased). Unreadable or undersized files are
/// skipped with a logged warning; an empty result is an error.
pub fn ingest(hr_dir: &Path, scale: usize) -> Result<Dataset> {
    if !matches!(scale, 2 | 3 | 4) {
        return Err(Error::invalid("ingest", "scale must be 2, 3, or 4"));
    }
    let mut pairs = Vec::new();
    let mut names = Vec::new();
    for path in png_paths_sorted(hr_dir)? {
        let hr = match read_png(&path) {
            Ok(img) => img,
            Err(err) => {
                log::warn!("skipping {}: {err}", path.display());
                continue;
            }
        };
        let (ch, cw) = ((hr.height() / scale) * scale, (hr.width() / scale) * scale);
        if ch == 0 || cw == 0 {
            log::warn!(
                "skipping {}: {}x{} is smaller than one {scale}x{scale} block",
                path.display(),
                hr.height(),
                hr.width()
            );
            continue;
        }
        let hr = hr.center_crop(ch, cw)?;
        let lr = bicubic_resize(&hr, ch / scale, cw / scale)?;
        pairs.push((lr, hr));
        names.push(file_stem(&path));
    }
    if pairs.is_empty() {
        return Err(Error::Dataset {
            msg: format!("no usable PNG images in {}", hr_dir.display()),
        });
    }
    Dataset::from_named_pairs(pairs, names, scale)
}

/// Pairs same-named PNGs from separate LR and HR directories. Files whose
/// dimensions disagree with the scale are skipped with a warning.
pub fn ingest_paired(lr_dir: &Path, hr_dir: &Path, scale: usize) -> Result<Dataset> {
    if !matches!(scale, 2 | 3 | 4) {
        return Err(Error::invalid("ingest_paired", "scale must be 2, 3, or 4"));
    }
    let hr_paths = png_paths_sorted(hr_dir)?;
    let mut pairs = Vec::new();
    let mut names = Vec::new();
    for hr_path in hr_paths {
        let name = hr_path.file_name().expect("listing yields real files");
        let lr_path = lr_dir.join(name);
        if !lr_path.is_file() {
            log::warn!("skipping {}: no LR partner", hr_path.display());
            continue;
        }
        let (hr, lr) = match (read_png(&hr_path), read_png(&lr_path)) {
            (Ok(hr), Ok(lr)) => (hr, lr),
            (Err(err), _) | (_, Err(err)) => {
                log::warn!("skipping {}: {err}", hr_path.display());
                continue;
            }
        };
        if hr.height() != scale * lr.height() || hr.width() != scale * lr.width() {
            log::warn!(
                "skipping {}: HR {}x{} is not {scale}x the LR {}x{}",
                hr_path.display(),
                hr.height(),
                hr.width(),
                lr.height(),
                lr.width()
            );
            continue;
        }
        pairs.push((lr, hr));
        names.push(file_stem(&hr_path));
    }
    if pairs.is_empty() {
        return Err(Error::Dataset {
            msg: format!("no usable LR/HR pairs across {} and {}", lr_dir.display(), hr_dir.display()),
        });
    }
    Dataset::from_named_pairs(pairs, names, scale)
}

/// Replaces every pair with five aligned sub-pairs: the four corners and the
/// center, each crop `crop_fraction` of the image side. `min_lr_side` (the
/// training patch size) rejects crops too small to sample from.
pub fn five_crop_expand(dataset: &Dataset, crop_fraction: f64, min_lr_side: usize) -> Result<Dataset> {
    if !(crop_fraction > 0.0 && crop_fraction <= 1.0) {
        return Err(Error::invalid(
            "five_crop_expand",
            format!("crop_fraction must be in (0, 1], got {crop_fraction}"),
        ));
    }
    let s = dataset.scale();
    let mut pairs = Vec::with_capacity(5 * dataset.len());
    let mut names = Vec::with_capacity(5 * dataset.len());
    for ((lr, hr), name) in dataset.pairs().iter().zip(dataset.names()) {
        let (h, w) = (lr.height(), lr.width());
        let ch = ((h as f64 * crop_fraction).round() as usize).clamp(1, h);
        let cw = ((w as f64 * crop_fraction).round() as usize).clamp(1, w);
        if ch < min_lr_side || cw < min_lr_side {
            return Err(Error::Dataset {
                msg: format!(
                    "five-crop of a {h}x{w} LR image yields {ch}x{cw}, smaller than the {min_lr_side} patch"
                ),
            });
        }
        let offsets = [
            ("tl", 0, 0),
            ("tr", 0, w - cw),
            ("bl", h - ch, 0),
            ("br", h - ch, w - cw),
            ("c", (h - ch) / 2, (w - cw) / 2),
        ];
        for (tag, y0, x0) in offsets {
            pairs.push((
                lr.crop(y0, x0, ch, cw)?,
                hr.crop(s * y0, s * x0, s * ch, s * cw)?,
            ));
            names.push(format!("{name}.{tag}"));
        }
    }
    Dataset::from_named_pairs(pairs, names, s)
}

/// Applies element `k` (0..8) of the dihedral group of the square: `k & 3`
/// quarter-turn rotations counterclockwise, then a horizontal flip if
/// `k & 4` is set. All eight are lossless permutations of the pixels.
pub fn dihedral_apply<T: Element>(t: &Tensor<T>, k: u8) -> Tensor<T> {
    assert!(k < 8, "dihedral elements are 0..8");
    let mut out = t.clone();
    for _ in 0..(k & 3) {
        out = rotate_quarter(&out);
    }
    if k & 4 != 0 {
        out = hflip(&out);
    }
    out
}

/// The group element that undoes `dihedral_apply(_, k)`. Pure rotations
/// invert to the complementary rotation; every rotate-then-flip element is
/// its own inverse.
pub fn dihedral_inverse(k: u8) -> u8 {
    assert!(k < 8, "dihedral elements are 0..8");
    if k < 4 {
        (4 - k) % 4
    } else {
        k
    }
}

fn rotate_quarter<T: Element>(t: &Tensor<T>) -> Tensor<T> {
    let s = t.shape();
    Tensor::from_fn(Shape::new(s.n, s.c, s.w, s.h), |n, c, y, x| {
        t.at(n, c, x, s.w - 1 - y)
    })
}

fn hflip<T: Element>(t: &Tensor<T>) -> Tensor<T> {
    let s = t.shape();
    Tensor::from_fn(s, |n, c, y, x| t.at(n, c, y, s.w - 1 - x))
}

/// Draws one training batch: per sample a uniformly random pair, a random
/// aligned patch position, and a random dihedral transform applied
/// identically to the LR and HR patches. Draw order per sample is fixed
/// (image, row, column, transform), so a seed fully determines the batch
/// sequence.
pub fn sample_batch<T: Element>(
    dataset: &Dataset,
    spec: &TrainSpec,
    rng: &mut ChaCha8Rng,
) -> Result<(Tensor<T>, Tensor<T>)> {
    if dataset.is_empty() {
        return Err(Error::Dataset { msg: "cannot sample from an empty dataset".into() });
    }
    if dataset.scale() != spec.scale {
        return Err(Error::invalid(
            "sample_batch",
            format!("dataset scale {} != train scale {}", dataset.scale(), spec.scale),
        ));
    }
    let p = spec.patch_size;
    if dataset.min_lr_side() < p {
        return Err(Error::Dataset {
            msg: format!(
                "patch size {p} exceeds the smallest LR side {}",
                dataset.min_lr_side()
            ),
        });
    }
    let s = spec.scale;
    let sp = s * p;
    let b = spec.batch;
    let mut lr_batch = Tensor::<T>::zeros(Shape::new(b, 3, p, p));
    let mut hr_batch = Tensor::<T>::zeros(Shape::new(b, 3, sp, sp));
    for bi in 0..b {
        let idx = rng.gen_range(0..dataset.len());
        let (lr, hr) = &dataset.pairs()[idx];
        let y = rng.gen_range(0..=lr.height() - p);
        let x = rng.gen_range(0..=lr.width() - p);
        let k = rng.gen_range(0..8u8);
        let lr_patch = dihedral_apply(lr.crop(y, x, p, p)?.tensor(), k);
        let hr_patch = dihedral_apply(hr.crop(s * y, s * x, sp, sp)?.tensor(), k);
        write_sample(&mut lr_batch, bi, &lr_patch);
        write_sample(&mut hr_batch, bi, &hr_patch);
    }
    Ok((lr_batch, hr_batch))
}

fn write_sample<T: Element>(batch: &mut Tensor<T>, n: usize, patch: &Tensor<f64>) {
    let bs = batch.shape();
    let ps = patch.shape();
    debug_assert_eq!((ps.c, ps.h, ps.w), (bs.c, bs.h, bs.w));
    let plane = ps.c * ps.h * ps.w;
    let dst = &mut batch.data_mut()[n * plane..(n + 1) * plane];
    for (d, v) in dst.iter_mut().zip(patch.data()) {
        *d = T::from_f64(*v);
    }
}

/// Learning rate at an epoch: `lr0 * 0.5^floor(epoch / halve_period)`.
pub fn lr_at(epoch: usize, spec: &TrainSpec) -> f64 {
    spec.lr0 * 0.5f64.powi((epoch / spec.halve_period) as i32)
}

/// How a training run reports and persists its progress.
#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Append per-epoch `epoch,lr,mean_l1` rows here (header written when
    /// starting from epoch 0).
    pub csv_path: Option<PathBuf>,
    /// Where to save checkpoints; always saved at the final epoch.
    pub checkpoint_path: Option<PathBuf>,
    /// Additionally checkpoint every this many epochs (0 = final only).
    pub checkpoint_period: usize,
    /// Print one line per epoch to stdout.
    pub log_epochs: bool,
}

/// One completed epoch in a loss trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub mean_l1: f64,
}

/// The loss trace produced by one [`train`] call.
#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
}

/// Optimizes the network by mean-over-batch L1 against the HR patches, one
/// Adam step per batch, `ceil(pairs / batch)` batches per epoch. `state`
/// carries epoch/optimizer/RNG progress, so passing a checkpoint's state
/// resumes exactly where it stopped. Aborts on non-finite losses or
/// gradients, naming the epoch/step or parameter.
pub fn train(
    net: &mut SrNetwork<f32>,
    dataset: &Dataset,
    spec: &TrainSpec,
    state: &mut TrainState,
    options: &TrainOptions,
) -> Result<TrainReport> {
    spec.validate()?;
    if net.spec().scale != spec.scale {
        return Err(Error::invalid(
            "train",
            format!("network scale {} != train scale {}", net.spec().scale, spec.scale),
        ));
    }
    if dataset.scale() != spec.scale {
        return Err(Error::invalid(
            "train",
            format!("dataset scale {} != train scale {}", dataset.scale(), spec.scale),
        ));
    }
    if dataset.min_lr_side() < spec.patch_size {
        return Err(Error::Dataset {
            msg: format!(
                "patch size {} exceeds the smallest LR side {}",
                spec.patch_size,
                dataset.min_lr_side()
            ),
        });
    }
    if state.epoch > spec.epochs {
        return Err(Error::invalid(
            "train",
            format!("resume epoch {} is past the requested {} epochs", state.epoch, spec.epochs),
        ));
    }

    let steps_per_epoch = dataset.len().div_ceil(spec.batch);
    let mut csv = match &options.csv_path {
        Some(path) => {
            let mut file = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|source| Error::Io { path: path.clone(), source })?;
            if state.epoch == 0 {
                // Restart the trace rather than appending to a stale one.
                file.set_len(0).map_err(|source| Error::Io { path: path.clone(), source })?;
                writeln!(file, "epoch,lr,mean_l1")
                    .map_err(|source| Error::Io { path: path.clone(), source })?;
            }
            Some((file, path.clone()))
        }
        None => None,
    };

    let mut report = TrainReport::default();
    for epoch in state.epoch..spec.epochs {
        let lr = lr_at(epoch, spec);
        let mut loss_sum = 0.0f64;
        for step in 0..steps_per_epoch {
            let (lr_batch, hr_batch) = sample_batch::<f32>(dataset, spec, &mut state.rng)?;
            let prediction = net.forward(&Var::constant(lr_batch))?;
            let loss = l1_loss(&prediction, &Var::constant(hr_batch))?;
            let value = f64::from(loss.scalar_value()?);
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            let grads = loss.backward()?;
            state.adam.step(net.params_mut(), &grads, lr)?;
            loss_sum += value;
        }
        let mean_l1 = loss_sum / steps_per_epoch as f64;
        state.epoch = epoch + 1;
        report.records.push(EpochRecord { epoch, lr, mean_l1 });
        if let Some((file, path)) = &mut csv {
            writeln!(file, "{epoch},{lr},{mean_l1}")
                .map_err(|source| Error::Io { path: path.clone(), source })?;
        }
        if options.log_epochs {
            println!("epoch {epoch} lr {lr} mean_l1 {mean_l1}");
        }
        if let Some(path) = &options.checkpoint_path {
            let due = options.checkpoint_period > 0 && (epoch + 1) % options.checkpoint_period == 0;
            if due || epoch + 1 == spec.epochs {
                save_checkpoint(path, net, spec, state)?;
            }
        }
    }
    Ok(report)
}

/// Fresh training progress for a new run.
pub fn fresh_state(seed: u64) -> TrainState {
    TrainState {
        epoch: 0,
        adam: AdamState::new(),
        rng: ChaCha8Rng::seed_from_u64(seed),
    }
}
