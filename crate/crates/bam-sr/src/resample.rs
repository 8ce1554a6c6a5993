//! Separable cubic-kernel image resampling.
//!
//! One resampling core serves two callers: the image-quality pipeline (LR
//! synthesis, bicubic baselines) and the differentiable upscale used for the
//! network's global skip connection. Sharing the core guarantees that a
//! network with a zeroed body reproduces the bicubic baseline exactly.
//!
//! Conventions:
//! - cubic kernel with `a = -0.5` (Catmull-Rom);
//! - output coordinate `o` samples source position `(o + 0.5) / scale - 0.5`;
//! - on downscale the kernel support is widened by the scale factor
//!   (antialiasing); upscale uses the plain 4-tap kernel;
//! - source indices outside the image clamp to the nearest edge;
//! - tap weights are normalized to sum to one, so constant images stay
//!   constant at any size and same-size resampling is the exact identity.

use crate::tensor::{Element, Shape, Tensor};

/// Cubic convolution kernel with `a = -0.5`.
fn cubic(x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        (1.5 * x - 2.5) * x * x + 1.0
    } else if x < 2.0 {
        ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0
    } else {
        0.0
    }
}

/// Sampling plan along one axis: for each output index, `taps` consecutive
/// `(source_index, weight)` entries.
pub(crate) struct AxisPlan {
    pub taps: usize,
    /// `out_len * taps` entries, row-major per output index.
    pub entries: Vec<(u32, f64)>,
}

/// Builds the tap plan for resampling a length-`in_len` axis to `out_len`.
pub(crate) fn axis_plan(in_len: usize, out_len: usize) -> AxisPlan {
    let scale = out_len as f64 / in_len as f64;
    // Downscale: evaluate a widened kernel so the result is antialiased.
    let kscale = scale.min(1.0);
    let support = 2.0 / kscale;
    let taps = (2.0 * support).ceil() as usize + 2;
    let mut entries = Vec::with_capacity(out_len * taps);
    for o in 0..out_len {
        let u = (o as f64 + 0.5) / scale - 0.5;
        let start = (u - support).floor() as isize;
        let base = entries.len();
        let mut sum = 0.0;
        for t in 0..taps {
            let idx = start + t as isize;
            let w = cubic((u - idx as f64) * kscale) * kscale;
            let clamped = idx.clamp(0, in_len as isize - 1) as u32;
            entries.push((clamped, w));
            sum += w;
        }
        for e in &mut entries[base..] {
            e.1 /= sum;
        }
    }
    AxisPlan { taps, entries }
}

/// Tap count used per output sample for the given axis resize; the basis of
/// the floating-point cost model for resampling.
pub(crate) fn axis_taps(in_len: usize, out_len: usize) -> usize {
    let scale = out_len as f64 / in_len as f64;
    let support = 2.0 / scale.min(1.0);
    (2.0 * support).ceil() as usize + 2
}

/// Resamples one `h x w` plane to `oh x ow`, rows first, then columns.
pub fn resize_plane<T: Element>(src: &[T], h: usize, w: usize, oh: usize, ow: usize) -> Vec<T> {
    assert_eq!(src.len(), h * w, "plane buffer does not match extents");
    let row = axis_plan(w, ow);
    let col = axis_plan(h, oh);

    // Horizontal pass: h x w -> h x ow.
    let mut tmp = vec![T::zero(); h * ow];
    for y in 0..h {
        let src_row = &src[y * w..(y + 1) * w];
        let dst_row = &mut tmp[y * ow..(y + 1) * ow];
        for (ox, d) in dst_row.iter_mut().enumerate() {
            let mut acc = T::zero();
            for &(idx, wt) in &row.entries[ox * row.taps..(ox + 1) * row.taps] {
                acc = acc + T::from_f64(wt) * src_row[idx as usize];
            }
            *d = acc;
        }
    }

    // Vertical pass: h x ow -> oh x ow.
    let mut out = vec![T::zero(); oh * ow];
    for oy in 0..oh {
        let dst_row = &mut out[oy * ow..(oy + 1) * ow];
        for &(idx, wt) in &col.entries[oy * col.taps..(oy + 1) * col.taps] {
            let wt = T::from_f64(wt);
            let src_row = &tmp[idx as usize * ow..(idx as usize + 1) * ow];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d = *d + wt * *s;
            }
        }
    }
    out
}

/// Adjoint of [`resize_plane`]: scatters an `oh x ow` output gradient back to
/// the `h x w` source through the same tap plans. The resampler is linear, so
/// this is its exact reverse-mode gradient.
pub(crate) fn resize_plane_backward<T: Element>(
    gout: &[T],
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
) -> Vec<T> {
    let row = axis_plan(w, ow);
    let col = axis_plan(h, oh);

    // Reverse the vertical pass: oh x ow -> h x ow.
    let mut gtmp = vec![T::zero(); h * ow];
    for oy in 0..oh {
        let g_row = &gout[oy * ow..(oy + 1) * ow];
        for &(idx, wt) in &col.entries[oy * col.taps..(oy + 1) * col.taps] {
            let wt = T::from_f64(wt);
            let dst_row = &mut gtmp[idx as usize * ow..(idx as usize + 1) * ow];
            for (d, g) in dst_row.iter_mut().zip(g_row) {
                *d = *d + wt * *g;
            }
        }
    }

    // Reverse the horizontal pass: h x ow -> h x w.
    let mut gx = vec![T::zero(); h * w];
    for y in 0..h {
        let g_row = &gtmp[y * ow..(y + 1) * ow];
        let dst_row = &mut gx[y * w..(y + 1) * w];
        for (ox, g) in g_row.iter().enumerate() {
            for &(idx, wt) in &row.entries[ox * row.taps..(ox + 1) * row.taps] {
                dst_row[idx as usize] = dst_row[idx as usize] + T::from_f64(wt) * *g;
            }
        }
    }
    gx
}

/// Resamples every `(n, c)` plane of a tensor to `oh x ow`.
pub fn resize_tensor<T: Element>(x: &Tensor<T>, oh: usize, ow: usize) -> Tensor<T> {
    let s = x.shape();
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, oh, ow));
    let plane_in = s.h * s.w;
    let plane_out = oh * ow;
    for p in 0..s.n * s.c {
        let resized = resize_plane(&x.data()[p * plane_in..(p + 1) * plane_in], s.h, s.w, oh, ow);
        out.data_mut()[p * plane_out..(p + 1) * plane_out].copy_from_slice(&resized);
    }
    out
}

/// Adjoint of [`resize_tensor`] for a known source shape.
pub(crate) fn resize_tensor_backward<T: Element>(src_shape: Shape, gout: &Tensor<T>) -> Tensor<T> {
    let gs = gout.shape();
    let mut gx = Tensor::zeros(src_shape);
    let plane_in = src_shape.h * src_shape.w;
    let plane_out = gs.h * gs.w;
    for p in 0..src_shape.n * src_shape.c {
        let g = resize_plane_backward(
            &gout.data()[p * plane_out..(p + 1) * plane_out],
            src_shape.h,
            src_shape.w,
            gs.h,
            gs.w,
        );
        gx.data_mut()[p * plane_in..(p + 1) * plane_in].copy_from_slice(&g);
    }
    gx
}
