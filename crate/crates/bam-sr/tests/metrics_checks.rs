//! Image-quality metrics validated against independent double-loop reference
//! implementations, plus resampler and luma-conversion anchors.

use bam_sr::metrics::{bicubic_resize, psnr, rgb_to_y, ssim, Colorspace, Image, MetricReport};
use bam_sr::resample::resize_tensor;
use bam_sr::tensor::{Shape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn y_image(h: usize, w: usize, seed: u64) -> Image {
    let t = Tensor::rand_uniform(Shape::new(1, 1, h, w), 0.0, 1.0, &mut rng(seed));
    Image::new(t, Colorspace::Y).unwrap()
}

/// Reference PSNR: plain accumulation loop and the dB formula, nothing shared
/// with the library implementation.
fn psnr_reference(a: &Image, b: &Image, shave: usize) -> f64 {
    let (h, w) = (a.height(), a.width());
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for y in shave..h - shave {
        for x in shave..w - shave {
            let d = a.at(0, y, x) - b.at(0, y, x);
            sum += d * d;
            count += 1;
        }
    }
    let mse = sum / count as f64;
    if mse == 0.0 {
        100.0
    } else {
        (10.0 * (1.0 / mse).log10()).min(100.0)
    }
}

/// Reference SSIM: per-window double loop with an 11x11 Gaussian built from
/// its definition, centered moments, and the canonical constants.
fn ssim_reference(a: &Image, b: &Image, shave: usize) -> f64 {
    let sigma = 1.5f64;
    let mut g = [[0.0f64; 11]; 11];
    let mut norm = 0.0;
    for (i, row) in g.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (dy, dx) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp();
            norm += *v;
        }
    }
    for row in &mut g {
        for v in row {
            *v /= norm;
        }
    }

    let (h, w) = (a.height() - 2 * shave, a.width() - 2 * shave);
    let c1 = 0.0001f64;
    let c2 = 0.0009f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for wy in 0..h - 10 {
        for wx in 0..w - 10 {
            let (mut mx, mut my) = (0.0f64, 0.0f64);
            for i in 0..11 {
                for j in 0..11 {
                    mx += g[i][j] * a.at(0, shave + wy + i, shave + wx + j);
                    my += g[i][j] * b.at(0, shave + wy + i, shave + wx + j);
                }
            }
            let (mut vx, mut vy, mut cov) = (0.0f64, 0.0f64, 0.0f64);
            for i in 0..11 {
                for j in 0..11 {
                    let da = a.at(0, shave + wy + i, shave + wx + j) - mx;
                    let db = b.at(0, shave + wy + i, shave + wx + j) - my;
                    vx += g[i][j] * da * da;
                    vy += g[i][j] * db * db;
                    cov += g[i][j] * da * db;
                }
            }
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            windows += 1;
        }
    }
    total / windows as f64
}

#[test]
fn psnr_matches_loop_oracle_on_random_pairs() {
    for trial in 0..50 {
        let a = y_image(48, 48, 100 + trial);
        let b = y_image(48, 48, 200 + trial);
        let shave = (trial % 3) as usize;
        let got = psnr(&a, &b, shave).unwrap();
        let want = psnr_reference(&a, &b, shave);
        assert!((got - want).abs() <= 1e-10, "trial {trial}: {got} vs {want}");
    }
}

#[test]
fn ssim_matches_windowed_loop_oracle_on_random_pairs() {
    for trial in 0..50 {
        let a = y_image(48, 48, 300 + trial);
        let b = y_image(48, 48, 400 + trial);
        let shave = (trial % 3) as usize;
        let got = ssim(&a, &b, shave).unwrap();
        let want = ssim_reference(&a, &b, shave);
        assert!((got - want).abs() <= 1e-9, "trial {trial}: {got} vs {want}");
    }
}

#[test]
fn identical_images_hit_the_documented_caps() {
    let a = y_image(48, 48, 7);
    assert_eq!(psnr(&a, &a, 2).unwrap(), 100.0);
    assert_eq!(ssim(&a, &a, 2).unwrap(), 1.0);
    let report = MetricReport::measure(&a, &a, 2).unwrap();
    assert_eq!(report.column(), "100.00/1.0000");
    assert_eq!(report.border_shave, 2);
}

#[test]
fn uniform_offset_gives_twenty_db() {
    let base = Tensor::rand_uniform(Shape::new(1, 1, 48, 48), 0.15, 0.85, &mut rng(8));
    let a = Image::new(base.clone(), Colorspace::Y).unwrap();
    let b = Image::new(base.map(|v| v + 0.1), Colorspace::Y).unwrap();
    let got = psnr(&a, &b, 0).unwrap();
    assert!((got - 20.0).abs() <= 1e-9, "MSE 0.01 must give 20 dB, got {got}");
}

#[test]
fn psnr_strictly_decreases_with_noise_amplitude() {
    let base = Tensor::rand_uniform(Shape::new(1, 1, 32, 32), 0.3, 0.7, &mut rng(9));
    let noise = Tensor::rand_uniform(Shape::new(1, 1, 32, 32), -1.0, 1.0, &mut rng(10));
    let reference = Image::new(base.clone(), Colorspace::Y).unwrap();
    let mut last = f64::INFINITY;
    for amp in [0.01, 0.03, 0.1, 0.25] {
        let noisy: Vec<f64> = base
            .data()
            .iter()
            .zip(noise.data())
            .map(|(v, n)| v + amp * n)
            .collect();
        let test = Image::new(Tensor::new(base.shape(), noisy).unwrap(), Colorspace::Y).unwrap();
        let p = psnr(&reference, &test, 0).unwrap();
        assert!(p < last, "psnr must fall as noise grows: {p} !< {last}");
        last = p;
    }
}

#[test]
fn ssim_is_symmetric_and_bounded() {
    for trial in 0..10 {
        let a = y_image(24, 30, 500 + trial);
        let b = y_image(24, 30, 600 + trial);
        let ab = ssim(&a, &b, 0).unwrap();
        let ba = ssim(&b, &a, 0).unwrap();
        assert!((ab - ba).abs() <= 1e-12, "asymmetric: {ab} vs {ba}");
        assert!((-1.0..=1.0).contains(&ab), "ssim {ab} out of [-1,1]");
        assert!(ab < 1.0, "distinct images must not reach 1.0");
    }
}

#[test]
fn metric_preconditions_are_enforced() {
    let a = y_image(20, 20, 11);
    let b = y_image(20, 22, 12);
    assert!(psnr(&a, &b, 0).is_err(), "shape mismatch must be rejected");
    assert!(psnr(&a, &a, 10).is_err(), "shave leaving nothing must be rejected");
    // 20 - 2*5 = 10 < 11-pixel window.
    assert!(ssim(&a, &a, 5).is_err(), "window larger than shaved image must be rejected");
}

#[test]
fn shave_excludes_exactly_the_border_ring() {
    let base = Tensor::full(Shape::new(1, 1, 24, 24), 0.5);
    let mut damaged = base.data().to_vec();
    for y in 0..24 {
        for x in 0..24 {
            if y == 0 || y == 23 || x == 0 || x == 23 {
                damaged[y * 24 + x] = 1.0;
            }
        }
    }
    let a = Image::new(base, Colorspace::Y).unwrap();
    let b = Image::new(Tensor::new(Shape::new(1, 1, 24, 24), damaged).unwrap(), Colorspace::Y).unwrap();
    assert!(psnr(&a, &b, 0).unwrap() < 100.0, "border damage visible without shave");
    assert_eq!(psnr(&a, &b, 1).unwrap(), 100.0, "shave 1 must hide a 1-pixel ring");
}

#[test]
fn luma_conversion_anchors_and_formula() {
    let white = rgb_to_y(&Image::constant_rgb(4, 4, 1.0)).unwrap();
    let black = rgb_to_y(&Image::constant_rgb(4, 4, 0.0)).unwrap();
    assert!((white.at(0, 0, 0) - 235.0 / 255.0).abs() <= 1e-15);
    assert!((black.at(0, 0, 0) - 16.0 / 255.0).abs() <= 1e-15);

    let rgb = Tensor::rand_uniform(Shape::new(1, 3, 5, 6), 0.0, 1.0, &mut rng(13));
    let image = Image::new(rgb.clone(), Colorspace::Rgb).unwrap();
    let y = rgb_to_y(&image).unwrap();
    for yy in 0..5 {
        for xx in 0..6 {
            let (r, g, b) = (image.at(0, yy, xx), image.at(1, yy, xx), image.at(2, yy, xx));
            let want = (65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0;
            assert!((y.at(0, yy, xx) - want).abs() <= 1e-12);
            assert!(y.at(0, yy, xx) >= 16.0 / 255.0 - 1e-12);
            assert!(y.at(0, yy, xx) <= 235.0 / 255.0 + 1e-12);
        }
    }

    assert!(rgb_to_y(&y).is_err(), "luminance input must be rejected");
}

#[test]
fn luma_conversion_is_affine_in_the_pixel() {
    // y(alpha p) - y(0) must scale linearly with alpha below the clamp range.
    let p = (0.9, 0.4, 0.7);
    let at = |alpha: f64| {
        let t = Tensor::from_fn(Shape::new(1, 3, 2, 2), |_, c, _, _| match c {
            0 => alpha * p.0,
            1 => alpha * p.1,
            _ => alpha * p.2,
        });
        rgb_to_y(&Image::new(t, Colorspace::Rgb).unwrap()).unwrap().at(0, 0, 0)
    };
    let y0 = at(0.0);
    assert!(((at(0.5) - y0) - 2.0 * (at(0.25) - y0)).abs() <= 1e-12);
}

#[test]
fn resize_preserves_constants_and_identity() {
    let c = Image::constant_rgb(9, 7, 0.37);
    for (oh, ow) in [(3usize, 2usize), (9, 7), (18, 14), (20, 23)] {
        let out = bicubic_resize(&c, oh, ow).unwrap();
        assert_eq!((out.height(), out.width()), (oh, ow));
        for y in 0..oh {
            for x in 0..ow {
                for ch in 0..3 {
                    assert!((out.at(ch, y, x) - 0.37).abs() <= 1e-12);
                }
            }
        }
    }

    let img = y_image(12, 11, 14);
    let same = bicubic_resize(&img, 12, 11).unwrap();
    for y in 0..12 {
        for x in 0..11 {
            assert!((same.at(0, y, x) - img.at(0, y, x)).abs() <= 1e-12);
        }
    }
}

#[test]
fn ramp_downscale_matches_direct_kernel_sum() {
    // One row, width 32, halved to 16: evaluate the antialiased Catmull-Rom
    // sum with clamped coordinates and weight normalization at every output
    // coordinate, straight from the resampling convention.
    let w = 32usize;
    let ow = 16usize;
    let src: Vec<f64> = (0..w).map(|x| x as f64 / (w - 1) as f64).collect();
    let t = Tensor::new(Shape::new(1, 1, 1, w), src.clone()).unwrap();
    let got = resize_tensor(&t, 1, ow);

    let cubic = |x: f64| {
        let x = x.abs();
        if x < 1.0 {
            (1.5 * x - 2.5) * x * x + 1.0
        } else if x < 2.0 {
            ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0
        } else {
            0.0
        }
    };
    let scale = ow as f64 / w as f64;
    for o in 0..ow {
        let u = (o as f64 + 0.5) / scale - 0.5;
        // Downscale by 2 widens the kernel support to 4 source pixels.
        let mut acc = 0.0;
        let mut norm = 0.0;
        let lo = (u - 4.0).floor() as isize - 1;
        let hi = (u + 4.0).ceil() as isize + 1;
        for j in lo..=hi {
            let weight = cubic((u - j as f64) * scale) * scale;
            let idx = j.clamp(0, w as isize - 1) as usize;
            acc += weight * src[idx];
            norm += weight;
        }
        let want = acc / norm;
        let g = got.data()[o];
        assert!((g - want).abs() <= 1e-9, "output {o}: {g} vs kernel sum {want}");
    }
}

#[test]
fn resampling_is_linear_before_clamping() {
    let mut r = rng(15);
    let a = Tensor::<f64>::rand_uniform(Shape::new(1, 1, 10, 9), -1.0, 1.0, &mut r);
    let b = Tensor::<f64>::rand_uniform(Shape::new(1, 1, 10, 9), -1.0, 1.0, &mut r);
    let (alpha, beta) = (0.6, -0.3);
    let mixed: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| alpha * x + beta * y)
        .collect();
    let mixed = Tensor::new(a.shape(), mixed).unwrap();

    let fa = resize_tensor(&a, 17, 23);
    let fb = resize_tensor(&b, 17, 23);
    let fm = resize_tensor(&mixed, 17, 23);
    for i in 0..fm.shape().count() {
        let want = alpha * fa.data()[i] + beta * fb.data()[i];
        assert!((fm.data()[i] - want).abs() <= 1e-12, "non-linear at {i}");
    }
}
