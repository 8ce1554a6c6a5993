//! 8-bit RGB PNG input and output.
//!
//! Files decode to `[0, 1]` double-precision images (value = byte / 255).
//! On save, values are clamped to `[0, 1]` and quantized with
//! round-half-away-from-zero, the same rule [`quantize_8bit`] applies, so a
//! written file decodes back to exactly its quantized in-memory image.

use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{Colorspace, Image};
use crate::tensor::{Shape, Tensor};

/// Decodes an 8-bit RGB PNG (other layouts are converted) into an image.
pub fn read_png(path: &Path) -> Result<Image> {
    let decoded = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    let tensor = Tensor::from_fn(Shape::new(1, 3, h as usize, w as usize), |_, c, y, x| {
        f64::from(rgb.get_pixel(x as u32, y as u32).0[c]) / 255.0
    });
    Image::new(tensor, Colorspace::Rgb)
}

/// Encodes an RGB image to an 8-bit PNG, quantizing with
/// round-half-away-from-zero.
pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    if img.colorspace() != Colorspace::Rgb {
        return Err(Error::invalid("write_png", "only RGB images can be saved"));
    }
    let (h, w) = (img.height(), img.width());
    let mut bytes = Vec::with_capacity(3 * h * w);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                bytes.push(quantize_value(img.at(c, y, x)));
            }
        }
    }
    image::save_buffer(path, &bytes, w as u32, h as u32, image::ExtendedColorType::Rgb8)
        .map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

fn quantize_value(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Snaps every value to the nearest 8-bit level (`round(v * 255) / 255`,
/// half away from zero), so in-memory metrics match metrics computed on a
/// saved-and-reloaded PNG exactly.
pub fn quantize_8bit(img: &Image) -> Image {
    let shape = img.tensor().shape();
    let tensor = Tensor::from_fn(shape, |_, c, y, x| {
        f64::from(quantize_value(img.at(c, y, x))) / 255.0
    });
    Image::new(tensor, img.colorspace()).expect("quantization preserves image validity")
}
