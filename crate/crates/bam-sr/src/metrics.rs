//! Evaluation protocol: bicubic resizing, RGB-to-luminance conversion, and
//! PSNR/SSIM on the luminance channel.
//!
//! Images are `1 x C x H x W` double-precision tensors clamped to `[0, 1]`.
//! Metrics follow the super-resolution community conventions: both images
//! are converted to the Y channel of YCbCr (BT.601 studio swing), a border
//! of `shave` pixels (normally the upscale factor) is cropped, PSNR uses the
//! `[0, 1]` dynamic range with a documented 100 dB cap for zero error, and
//! SSIM is the single-scale original with an 11x11 Gaussian window
//! (sigma 1.5) evaluated over fully interior window positions only.

use crate::error::{Error, Result};
use crate::resample::resize_tensor;
use crate::tensor::{Shape, Tensor};

/// Tag distinguishing full-color images from extracted luminance planes.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Colorspace {
    /// Three channels, red/green/blue.
    Rgb,
    /// One channel, BT.601 studio-swing luminance.
    Y,
}

/// A single image: `1 x C x H x W`, values clamped to `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Image {
    tensor: Tensor<f64>,
    colorspace: Colorspace,
}

impl Image {
    /// Wraps a tensor as an image, clamping values into `[0, 1]`. The batch
    /// dimension must be 1 and the channel count must match the colorspace
    /// tag (3 for RGB, 1 for Y).
    pub fn new(tensor: Tensor<f64>, colorspace: Colorspace) -> Result<Self> {
        let shape = tensor.shape();
        if shape.n != 1 {
            return Err(Error::shape("Image::new", "batch dimension 1", shape));
        }
        let want = match colorspace {
            Colorspace::Rgb => 3,
            Colorspace::Y => 1,
        };
        if shape.c != want {
            return Err(Error::shape(
                "Image::new",
                format!("{want} channels for {colorspace:?}"),
                shape,
            ));
        }
        let tensor = tensor.map(|v| v.clamp(0.0, 1.0));
        Ok(Image { tensor, colorspace })
    }

    /// A constant-valued RGB image, handy in tests and syntheses.
    pub fn constant_rgb(h: usize, w: usize, value: f64) -> Self {
        Image {
            tensor: Tensor::full(Shape::new(1, 3, h, w), value.clamp(0.0, 1.0)),
            colorspace: Colorspace::Rgb,
        }
    }

    pub fn height(&self) -> usize {
        self.tensor.shape().h
    }
    pub fn width(&self) -> usize {
        self.tensor.shape().w
    }
    pub fn channels(&self) -> usize {
        self.tensor.shape().c
    }
    pub fn colorspace(&self) -> Colorspace {
        self.colorspace
    }
    pub fn tensor(&self) -> &Tensor<f64> {
        &self.tensor
    }
    pub fn into_tensor(self) -> Tensor<f64> {
        self.tensor
    }

    /// Pixel accessor (channel, row, column).
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.tensor.at(0, c, y, x)
    }

    /// Central sub-image of the given size (used to make dimensions exact
    /// multiples of the upscale factor before pairing HR with LR).
    pub fn center_crop(&self, out_h: usize, out_w: usize) -> Result<Image> {
        let (h, w) = (self.height(), self.width());
        if out_h == 0 || out_w == 0 || out_h > h || out_w > w {
            return Err(Error::invalid(
                "center_crop",
                format!("cannot crop {h}x{w} to {out_h}x{out_w}"),
            ));
        }
        let (y0, x0) = ((h - out_h) / 2, (w - out_w) / 2);
        self.crop(y0, x0, out_h, out_w)
    }

    /// Sub-image at (row, column) of the given size.
    pub fn crop(&self, y0: usize, x0: usize, out_h: usize, out_w: usize) -> Result<Image> {
        let (h, w, c) = (self.height(), self.width(), self.channels());
        if y0 + out_h > h || x0 + out_w > w || out_h == 0 || out_w == 0 {
            return Err(Error::invalid(
                "crop",
                format!("window {out_h}x{out_w} at ({y0},{x0}) exceeds {h}x{w}"),
            ));
        }
        let tensor = Tensor::from_fn(Shape::new(1, c, out_h, out_w), |_, ch, y, x| {
            self.tensor.at(0, ch, y0 + y, x0 + x)
        });
        Ok(Image { tensor, colorspace: self.colorspace })
    }
}

/// Separable cubic-kernel resampling (a = -0.5) with antialiasing on
/// downscale and clamped edge handling; output re-clamped to `[0, 1]`.
pub fn bicubic_resize(image: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("bicubic_resize", "output dims must be >= 1"));
    }
    let resized = resize_tensor(image.tensor(), out_h, out_w);
    Image::new(resized, image.colorspace())
}

/// BT.601 studio-swing luminance: `Y = (65.481 R + 128.553 G + 24.966 B + 16) / 255`
/// with R, G, B in `[0, 1]`, so Y lies in `[16/255, 235/255]`.
pub fn rgb_to_y(image: &Image) -> Result<Image> {
    if image.colorspace() != Colorspace::Rgb {
        return Err(Error::invalid("rgb_to_y", "input must be RGB-tagged"));
    }
    let (h, w) = (image.height(), image.width());
    let tensor = Tensor::from_fn(Shape::new(1, 1, h, w), |_, _, y, x| {
        let r = image.at(0, y, x);
        let g = image.at(1, y, x);
        let b = image.at(2, y, x);
        (65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0
    });
    Image::new(tensor, Colorspace::Y)
}

fn check_pair(op: &'static str, reference: &Image, test: &Image, shave: usize) -> Result<(usize, usize)> {
    if reference.tensor().shape() != test.tensor().shape() {
        return Err(Error::shape(op, reference.tensor().shape(), test.tensor().shape()));
    }
    if reference.colorspace() != test.colorspace() {
        return Err(Error::invalid(op, "images must share a colorspace"));
    }
    let (h, w) = (reference.height(), reference.width());
    if 2 * shave >= h.min(w) {
        return Err(Error::invalid(
            op,
            format!("shave {shave} leaves nothing of a {h}x{w} image"),
        ));
    }
    Ok((h - 2 * shave, w - 2 * shave))
}

/// Peak signal-to-noise ratio in dB over the shaved interior, on the
/// `[0, 1]` scale: `10 log10(1 / MSE)`, capped at 100 dB (returned exactly
/// for zero error).
pub fn psnr(reference: &Image, test: &Image, shave: usize) -> Result<f64> {
    let (ch, cw) = check_pair("psnr", reference, test, shave)?;
    let c = reference.channels();
    let mut sum_sq = 0.0f64;
    for ci in 0..c {
        for y in 0..ch {
            for x in 0..cw {
                let d = reference.at(ci, y + shave, x + shave) - test.at(ci, y + shave, x + shave);
                sum_sq += d * d;
            }
        }
    }
    let mse = sum_sq / (c * ch * cw) as f64;
    if mse == 0.0 {
        return Ok(100.0);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(100.0))
}

fn gaussian_window() -> [f64; 11] {
    let sigma = 1.5f64;
    let mut w = [0.0f64; 11];
    for (i, slot) in w.iter_mut().enumerate() {
        let d = i as f64 - 5.0;
        *slot = (-d * d / (2.0 * sigma * sigma)).exp();
    }
    let sum: f64 = w.iter().sum();
    for slot in &mut w {
        *slot /= sum;
    }
    w
}

/// Horizontal-then-vertical weighted sums over every fully interior 11x11
/// window of `plane`. Output is `(h - 10) x (w - 10)`.
fn windowed_sums(plane: &[f64], h: usize, w: usize, window: &[f64; 11]) -> Vec<f64> {
    let ow = w - 10;
    let oh = h - 10;
    let mut horizontal = vec![0.0f64; h * ow];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, wt) in window.iter().enumerate() {
                acc += wt * plane[y * w + x + t];
            }
            horizontal[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0f64; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, wt) in window.iter().enumerate() {
                acc += wt * horizontal[(y + t) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Single-scale structural similarity over the shaved interior: 11x11
/// Gaussian window with sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1,
/// averaged over fully interior window positions. Identical inputs yield
/// exactly 1.0.
pub fn ssim(reference: &Image, test: &Image, shave: usize) -> Result<f64> {
    let (ch, cw) = check_pair("ssim", reference, test, shave)?;
    if ch < 11 || cw < 11 {
        return Err(Error::invalid(
            "ssim",
            format!("shaved image {ch}x{cw} is smaller than the 11x11 window"),
        ));
    }
    let window = gaussian_window();
    let c1 = (0.01f64).powi(2);
    let c2 = (0.03f64).powi(2);
    let channels = reference.channels();
    let mut total = 0.0f64;
    let mut windows = 0usize;
    for ci in 0..channels {
        let grab = |img: &Image| -> Vec<f64> {
            let mut v = Vec::with_capacity(ch * cw);
            for y in 0..ch {
                for x in 0..cw {
                    v.push(img.at(ci, y + shave, x + shave));
                }
            }
            v
        };
        let xs = grab(reference);
        let ys = grab(test);
        let xx: Vec<f64> = xs.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = ys.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = xs.iter().zip(&ys).map(|(a, b)| a * b).collect();

        let mu_x = windowed_sums(&xs, ch, cw, &window);
        let mu_y = windowed_sums(&ys, ch, cw, &window);
        let s_xx = windowed_sums(&xx, ch, cw, &window);
        let s_yy = windowed_sums(&yy, ch, cw, &window);
        let s_xy = windowed_sums(&xy, ch, cw, &window);

        for i in 0..mu_x.len() {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = s_xx[i] - mx * mx;
            let var_y = s_yy[i] - my * my;
            let cov = s_xy[i] - mx * my;
            let numerator = (2.0 * (mx * my) + c1) * (2.0 * cov + c2);
            let denominator = (mx * mx + my * my + c1) * (var_x + var_y + c2);
            total += numerator / denominator;
        }
        windows += mu_x.len();
    }
    Ok(total / windows as f64)
}

/// PSNR and SSIM of one evaluated pair, with the border shave they used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub border_shave: usize,
}

impl MetricReport {
    /// Measures both metrics on luminance images.
    pub fn measure(reference: &Image, test: &Image, shave: usize) -> Result<Self> {
        Ok(MetricReport {
            psnr_db: psnr(reference, test, shave)?,
            ssim: ssim(reference, test, shave)?,
            border_shave: shave,
        })
    }

    /// Combined `PSNR/SSIM` column in the conventional table style.
    pub fn column(&self) -> String {
        format!("{:.2}/{:.4}", self.psnr_db, self.ssim)
    }
}
