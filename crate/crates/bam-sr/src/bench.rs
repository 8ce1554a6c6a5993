//! Inference latency and FPS benchmarking.
//!
//! Identical host networks differing only in their attention mechanism run
//! timed single-image forward passes at a set of input sizes. Timing covers
//! tensor-in to tensor-out only (no image decode or encode), frames run
//! strictly serially on the calling thread, warm-up frames are excluded,
//! and `fps = frames / total_seconds` by construction.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::AttentionKind;
use crate::error::{Error, Result};
use crate::network::{Insertion, NetworkSpec, SrNetwork};
use crate::tensor::{Shape, Tensor, Var};

/// What to benchmark: one host architecture, several attention variants,
/// several input sizes.
#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub variants: Vec<AttentionKind>,
    /// Input sizes as (height, width).
    pub sizes: Vec<(usize, usize)>,
    /// Timed frames per variant and size (>= 20).
    pub frames: usize,
    /// Untimed warm-up frames before measurement (>= 5).
    pub warmup: usize,
    pub blocks: usize,
    pub width: usize,
    pub scale: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            variants: vec![
                AttentionKind::Bam,
                AttentionKind::Ca,
                AttentionKind::Se,
                AttentionKind::Cbam,
                AttentionKind::None,
            ],
            sizes: vec![(64, 64), (128, 128), (200, 200)],
            frames: 700,
            warmup: 5,
            blocks: 4,
            width: 16,
            scale: 2,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames < 20 {
            return Err(Error::invalid("BenchConfig", "frames must be >= 20"));
        }
        if self.warmup < 5 {
            return Err(Error::invalid("BenchConfig", "warmup must be >= 5 frames"));
        }
        if self.variants.is_empty() || self.sizes.is_empty() {
            return Err(Error::invalid("BenchConfig", "need at least one variant and one size"));
        }
        if self.sizes.iter().any(|&(h, w)| h == 0 || w == 0) {
            return Err(Error::invalid("BenchConfig", "input sizes must be >= 1"));
        }
        Ok(())
    }
}

/// Timing summary of one (variant, size) cell.
#[derive(Clone, Debug)]
pub struct BenchReport {
    pub kind: AttentionKind,
    pub input: (usize, usize),
    pub frames: usize,
    pub total_seconds: f64,
    pub fps: f64,
    pub median_ms: f64,
    pub p90_ms: f64,
}

fn quantile_ms(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx] * 1e3
}

fn median_ms(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] * 1e3
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) * 1e3
    }
}

/// Runs the full benchmark grid. Reports come back grouped by variant in
/// config order, sizes in config order within each variant.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchReport>> {
    config.validate()?;
    let mut reports = Vec::new();
    let mut guard = 0.0f64;
    for &kind in &config.variants {
        let spec = if kind == AttentionKind::None {
            NetworkSpec::plain(config.blocks, config.width, config.scale)
        } else {
            NetworkSpec::plain(config.blocks, config.width, config.scale)
                .with_attention(kind, Insertion::PerBlock)
        };
        let net = SrNetwork::<f32>::build(&spec, config.seed)?;
        for &(h, w) in &config.sizes {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
            let input = Tensor::<f32>::rand_uniform(Shape::new(1, 3, h, w), 0.0, 1.0, &mut rng);
            for _ in 0..config.warmup {
                let out = net.forward(&Var::constant(input.clone()))?;
                guard += f64::from(out.value().max_abs());
            }
            let mut latencies = Vec::with_capacity(config.frames);
            let run_start = Instant::now();
            for _ in 0..config.frames {
                let frame_start = Instant::now();
                let out = net.forward(&Var::constant(input.clone()))?;
                latencies.push(frame_start.elapsed().as_secs_f64());
                guard += f64::from(out.value().max_abs());
            }
            let total_seconds = run_start.elapsed().as_secs_f64();
            latencies.sort_by(|a, b| a.partial_cmp(b).expect("latencies are finite"));
            reports.push(BenchReport {
                kind,
                input: (h, w),
                frames: config.frames,
                total_seconds,
                fps: config.frames as f64 / total_seconds,
                median_ms: median_ms(&latencies),
                p90_ms: quantile_ms(&latencies, 0.9),
            });
        }
    }
    // Keep the forward results observable so the timed loop cannot be elided.
    if !guard.is_finite() {
        return Err(Error::invalid("run_bench", "network produced non-finite outputs"));
    }
    Ok(reports)
}
