//! Deterministic synthetic texture images.
//!
//! Desk-scale training and the integration tests need small corpora of
//! texture-rich RGB images without shipping binary assets. Each image mixes
//! two oriented sinusoid fields (mid-band frequencies that survive a 2-4x
//! downscale but get visibly damped by bicubic interpolation — exactly the
//! detail a super-resolver can learn to restore) over a handful of smooth
//! Gaussian luminance blobs for large-scale variation. Everything derives
//! from one seed, so corpora are reproducible bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::metrics::{Colorspace, Image};
use crate::tensor::{Shape, Tensor};

struct Wave {
    kx: f64,
    ky: f64,
    phase: f64,
    /// Per-channel amplitude.
    amp: [f64; 3],
}

struct Blob {
    cy: f64,
    cx: f64,
    inv_two_sigma_sq: f64,
    amp: [f64; 3],
}

/// One seeded texture image of the given size.
pub fn texture_image(h: usize, w: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;

    let mut waves = Vec::new();
    for band in 0..2 {
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        // Cycles per pixel: mid band first, a finer band second.
        let freq = if band == 0 {
            rng.gen_range(0.06..0.14)
        } else {
            rng.gen_range(0.14..0.22)
        };
        let phase = rng.gen_range(0.0..tau);
        let base_amp = if band == 0 { 0.20 } else { 0.13 };
        let amp = [
            base_amp * rng.gen_range(0.6..1.0),
            base_amp * rng.gen_range(0.6..1.0),
            base_amp * rng.gen_range(0.6..1.0),
        ];
        waves.push(Wave {
            kx: tau * freq * theta.cos(),
            ky: tau * freq * theta.sin(),
            phase,
            amp,
        });
    }

    let mut blobs = Vec::new();
    for _ in 0..4 {
        let cy = rng.gen_range(0.0..h as f64);
        let cx = rng.gen_range(0.0..w as f64);
        let sigma = rng.gen_range(0.15..0.45) * h.min(w) as f64;
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let amp = [
            sign * rng.gen_range(0.08..0.22),
            sign * rng.gen_range(0.08..0.22),
            sign * rng.gen_range(0.08..0.22),
        ];
        blobs.push(Blob {
            cy,
            cx,
            inv_two_sigma_sq: 1.0 / (2.0 * sigma * sigma),
            amp,
        });
    }

    let tensor = Tensor::from_fn(Shape::new(1, 3, h, w), |_, c, y, x| {
        let (yf, xf) = (y as f64, x as f64);
        let mut v = 0.5;
        for wave in &waves {
            v += wave.amp[c] * (wave.kx * xf + wave.ky * yf + wave.phase).sin();
        }
        for blob in &blobs {
            let d2 = (yf - blob.cy).powi(2) + (xf - blob.cx).powi(2);
            v += blob.amp[c] * (-d2 * blob.inv_two_sigma_sq).exp();
        }
        v
    });
    Image::new(tensor, Colorspace::Rgb).expect("synthetic tensor has image shape")
}

/// A corpus of `count` seeded texture images, all `h x w`.
pub fn texture_dataset(count: usize, h: usize, w: usize, seed: u64) -> Vec<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let image_seed = rng.gen::<u64>();
            texture_image(h, w, image_seed)
        })
        .collect()
}
