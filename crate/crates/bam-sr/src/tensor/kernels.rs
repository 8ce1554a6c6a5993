//! Raw forward and backward kernels behind the autograd ops.
//!
//! Kernels operate on validated shapes (the [`super::Var`] layer rejects
//! mismatches before calling in) and are deterministic: accumulation order is
//! fixed, and parallelism is restricted to the batch or output-channel axis
//! where per-item writes are disjoint, so multi-threaded results are
//! bit-identical to sequential execution.

use rayon::prelude::*;

use super::{Element, Shape, Tensor};

/// Runs `f(n, chunk_n)` over equally sized per-batch chunks, in parallel when
/// there is more than one batch entry. Single-entry calls stay on the calling
/// thread so latency benchmarks remain strictly serial.
fn for_each_batch<T: Send, F>(data: &mut [T], chunk: usize, f: F)
where
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if data.len() <= chunk {
        f(0, data);
    } else {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(n, c)| f(n, c));
    }
}

/// Copies `x` into a zero-padded buffer of `hp = h + 2*pad`, `wp = w + 2*pad`
/// per plane, preserving the `N x C` plane order.
fn pad_planes<T: Element>(x: &Tensor<T>, pad: usize) -> (Vec<T>, usize, usize) {
    let s = x.shape();
    let (hp, wp) = (s.h + 2 * pad, s.w + 2 * pad);
    let mut out = vec![T::zero(); s.n * s.c * hp * wp];
    let src = x.data();
    for plane in 0..s.n * s.c {
        let src_base = plane * s.h * s.w;
        let dst_base = plane * hp * wp;
        for y in 0..s.h {
            let src_row = &src[src_base + y * s.w..src_base + (y + 1) * s.w];
            let dst_row = &mut out[dst_base + (y + pad) * wp + pad..][..s.w];
            dst_row.copy_from_slice(src_row);
        }
    }
    (out, hp, wp)
}

/// Spatial extent of a stride-1 convolution output.
pub(crate) fn conv_out_extent(input: usize, kernel: usize, pad: usize) -> usize {
    input + 2 * pad - kernel + 1
}

/// Direct stride-1 convolution with zero padding.
///
/// `x: N x Cin x H x W`, `w: Cout x Cin x K x K` (stored with `n = Cout`,
/// `c = Cin`), `b: 1 x Cout x 1 x 1`.
pub(crate) fn conv2d_forward<T: Element>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    pad: usize,
) -> Tensor<T> {
    let xs = x.shape();
    let ws = w.shape();
    let (cout, cin, k) = (ws.n, ws.c, ws.h);
    let ho = conv_out_extent(xs.h, k, pad);
    let wo = conv_out_extent(xs.w, k, pad);
    let (xp, hp, wp) = pad_planes(x, pad);
    let out_shape = Shape::new(xs.n, cout, ho, wo);
    let mut out = Tensor::zeros(out_shape);
    let wdat = w.data();
    let bdat = b.data();

    for_each_batch(out.data_mut(), cout * ho * wo, |n, out_n| {
        let xp_n = &xp[n * cin * hp * wp..][..cin * hp * wp];
        for o in 0..cout {
            let plane = &mut out_n[o * ho * wo..][..ho * wo];
            plane.fill(bdat[o]);
            for c in 0..cin {
                let xpc = &xp_n[c * hp * wp..][..hp * wp];
                let wk = &wdat[(o * cin + c) * k * k..][..k * k];
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = wk[ky * k + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        for y in 0..ho {
                            let src = &xpc[(y + ky) * wp + kx..][..wo];
                            let dst = &mut plane[y * wo..][..wo];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d = *d + wv * *s;
                            }
                        }
                    }
                }
            }
        }
    });
    out
}

/// Reverse-mode gradient of [`conv2d_forward`] with respect to the input:
/// scatter each output gradient through the kernel into a padded buffer, then
/// crop the padding off.
pub(crate) fn conv2d_backward_input<T: Element>(
    x_shape: Shape,
    w: &Tensor<T>,
    pad: usize,
    gout: &Tensor<T>,
) -> Tensor<T> {
    let xs = x_shape;
    let ws = w.shape();
    let gs = gout.shape();
    let (cout, cin, k) = (ws.n, ws.c, ws.h);
    let (ho, wo) = (gs.h, gs.w);
    let (hp, wp) = (xs.h + 2 * pad, xs.w + 2 * pad);
    let wdat = w.data();
    let gdat = gout.data();

    let mut gxp = vec![T::zero(); xs.n * cin * hp * wp];
    for_each_batch(&mut gxp, cin * hp * wp, |n, gxp_n| {
        for o in 0..cout {
            let gplane = &gdat[(n * cout + o) * ho * wo..][..ho * wo];
            for c in 0..cin {
                let gxc = &mut gxp_n[c * hp * wp..][..hp * wp];
                let wk = &wdat[(o * cin + c) * k * k..][..k * k];
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = wk[ky * k + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        for y in 0..ho {
                            let src = &gplane[y * wo..][..wo];
                            let dst = &mut gxc[(y + ky) * wp + kx..][..wo];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d = *d + wv * *s;
                            }
                        }
                    }
                }
            }
        }
    });
    let mut gx = Tensor::zeros(xs);
    let gxd = gx.data_mut();
    for plane in 0..xs.n * cin {
        let src_base = plane * hp * wp;
        let dst_base = plane * xs.h * xs.w;
        for y in 0..xs.h {
            let src = &gxp[src_base + (y + pad) * wp + pad..][..xs.w];
            gxd[dst_base + y * xs.w..dst_base + (y + 1) * xs.w].copy_from_slice(src);
        }
    }
    gx
}

/// Reverse-mode gradients of [`conv2d_forward`] with respect to the weights
/// and the bias, parallel over output channels (each channel owns a disjoint
/// slice of both results, so the reduction order per element is fixed).
pub(crate) fn conv2d_backward_params<T: Element>(
    x: &Tensor<T>,
    w_shape: Shape,
    pad: usize,
    gout: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    let xs = x.shape();
    let gs = gout.shape();
    let (cout, cin, k) = (w_shape.n, w_shape.c, w_shape.h);
    let (ho, wo) = (gs.h, gs.w);
    let (xp, hp, wp) = pad_planes(x, pad);
    let gdat = gout.data();

    let mut gw = Tensor::zeros(w_shape);
    let mut gb = Tensor::zeros(Shape::new(1, cout, 1, 1));
    let per_channel: Vec<(Vec<T>, T)> = (0..cout)
        .into_par_iter()
        .map(|o| {
            let mut gw_o = vec![T::zero(); cin * k * k];
            let mut gb_o = T::zero();
            for n in 0..xs.n {
                let gplane = &gdat[(n * cout + o) * ho * wo..][..ho * wo];
                for g in gplane {
                    gb_o = gb_o + *g;
                }
                for c in 0..cin {
                    let xpc = &xp[(n * cin + c) * hp * wp..][..hp * wp];
                    for ky in 0..k {
                        for kx in 0..k {
                            let mut acc = T::zero();
                            for y in 0..ho {
                                let gr = &gplane[y * wo..][..wo];
                                let xr = &xpc[(y + ky) * wp + kx..][..wo];
                                for (g, xv) in gr.iter().zip(xr) {
                                    acc = acc + *g * *xv;
                                }
                            }
                            gw_o[(c * k + ky) * k + kx] = gw_o[(c * k + ky) * k + kx] + acc;
                        }
                    }
                }
            }
            (gw_o, gb_o)
        })
        .collect();
    let gwd = gw.data_mut();
    for (o, (gw_o, _)) in per_channel.iter().enumerate() {
        gwd[o * cin * k * k..(o + 1) * cin * k * k].copy_from_slice(gw_o);
    }
    let gbdat = gb.data_mut();
    for (o, (_, gb_o)) in per_channel.iter().enumerate() {
        gbdat[o] = *gb_o;
    }
    (gw, gb)
}

/// Mean over the spatial extent of each channel: `N x C x H x W -> N x C x 1 x 1`.
pub(crate) fn global_avg_pool_forward<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    let area = T::from_f64((s.h * s.w) as f64);
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, 1, 1));
    let xd = x.data();
    let od = out.data_mut();
    for plane in 0..s.n * s.c {
        let acc = compensated_sum(xd[plane * s.h * s.w..(plane + 1) * s.h * s.w].iter().copied());
        od[plane] = acc / area;
    }
    out
}

pub(crate) fn global_avg_pool_backward<T: Element>(x: &Tensor<T>, gout: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    let area = T::from_f64((s.h * s.w) as f64);
    let mut gx = Tensor::zeros(s);
    let gd = gx.data_mut();
    let god = gout.data();
    for plane in 0..s.n * s.c {
        let g = god[plane] / area;
        for v in &mut gd[plane * s.h * s.w..(plane + 1) * s.h * s.w] {
            *v = g;
        }
    }
    gx
}

/// Maximum over the spatial extent of each channel: `N x C x H x W -> N x C x 1 x 1`.
/// Ties resolve to the first position in row-major scan order.
pub(crate) fn global_max_pool_forward<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, 1, 1));
    let xd = x.data();
    let od = out.data_mut();
    for plane in 0..s.n * s.c {
        let slice = &xd[plane * s.h * s.w..(plane + 1) * s.h * s.w];
        let mut best = slice[0];
        for v in &slice[1..] {
            if *v > best {
                best = *v;
            }
        }
        od[plane] = best;
    }
    out
}

pub(crate) fn global_max_pool_backward<T: Element>(x: &Tensor<T>, gout: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    let mut gx = Tensor::zeros(s);
    let xd = x.data();
    let gd = gx.data_mut();
    let god = gout.data();
    for plane in 0..s.n * s.c {
        let slice = &xd[plane * s.h * s.w..(plane + 1) * s.h * s.w];
        let mut best = 0usize;
        for (i, v) in slice.iter().enumerate().skip(1) {
            if *v > slice[best] {
                best = i;
            }
        }
        gd[plane * s.h * s.w + best] = god[plane];
    }
    gx
}

/// Maximum across channels at each pixel: `N x C x H x W -> N x 1 x H x W`.
/// Ties resolve to the lowest channel index.
pub(crate) fn channel_max_pool_forward<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    let mut out = Tensor::zeros(Shape::new(s.n, 1, s.h, s.w));
    let xd = x.data();
    let od = out.data_mut();
    let plane = s.h * s.w;
    for n in 0..s.n {
        let base = n * s.c * plane;
        let dst = &mut od[n * plane..(n + 1) * plane];
        dst.copy_from_slice(&xd[base..base + plane]);
        for c in 1..s.c {
            let src = &xd[base + c * plane..base + (c + 1) * plane];
            for (d, v) in dst.iter_mut().zip(src) {
                if *v > *d {
                    *d = *v;
                }
            }
        }
    }
    out
}

pub(crate) fn channel_max_pool_backward<T: Element>(x: &Tensor<T>, gout: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    let mut gx = Tensor::zeros(s);
    let xd = x.data();
    let gd = gx.data_mut();
    let god = gout.data();
    let plane = s.h * s.w;
    for n in 0..s.n {
        let base = n * s.c * plane;
        for p in 0..plane {
            let mut best_c = 0usize;
            let mut best = xd[base + p];
            for c in 1..s.c {
                let v = xd[base + c * plane + p];
                if v > best {
                    best = v;
                    best_c = c;
                }
            }
            gd[base + best_c * plane + p] = god[n * plane + p];
        }
    }
    gx
}

/// Mean across channels at each pixel: `N x C x H x W -> N x 1 x H x W`.
pub(crate) fn channel_mean_pool_forward<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    let inv = T::one() / T::from_f64(s.c as f64);
    let mut out = Tensor::zeros(Shape::new(s.n, 1, s.h, s.w));
    let xd = x.data();
    let od = out.data_mut();
    let plane = s.h * s.w;
    for n in 0..s.n {
        let base = n * s.c * plane;
        let dst = &mut od[n * plane..(n + 1) * plane];
        for c in 0..s.c {
            let src = &xd[base + c * plane..base + (c + 1) * plane];
            for (d, v) in dst.iter_mut().zip(src) {
                *d = *d + *v;
            }
        }
        for d in dst.iter_mut() {
            *d = *d * inv;
        }
    }
    out
}

pub(crate) fn channel_mean_pool_backward<T: Element>(x: &Tensor<T>, gout: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    let inv = T::one() / T::from_f64(s.c as f64);
    let mut gx = Tensor::zeros(s);
    let gd = gx.data_mut();
    let god = gout.data();
    let plane = s.h * s.w;
    for n in 0..s.n {
        for c in 0..s.c {
            let dst = &mut gd[(n * s.c + c) * plane..][..plane];
            let src = &god[n * plane..(n + 1) * plane];
            for (d, g) in dst.iter_mut().zip(src) {
                *d = *g * inv;
            }
        }
    }
    gx
}

/// Parametric ReLU with one slope per channel. The subgradient at exactly
/// zero takes the positive branch (derivative 1).
pub(crate) fn prelu_forward<T: Element>(x: &Tensor<T>, slope: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    let sl = slope.data();
    let mut out = Tensor::zeros(s);
    let xd = x.data();
    let od = out.data_mut();
    let plane = s.h * s.w;
    for n in 0..s.n {
        for c in 0..s.c {
            let a = sl[c];
            let base = (n * s.c + c) * plane;
            for i in 0..plane {
                let v = xd[base + i];
                od[base + i] = if v >= T::zero() { v } else { a * v };
            }
        }
    }
    out
}

pub(crate) fn prelu_backward<T: Element>(
    x: &Tensor<T>,
    slope: &Tensor<T>,
    gout: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    let s = x.shape();
    let sl = slope.data();
    let mut gx = Tensor::zeros(s);
    let mut gs = Tensor::zeros(slope.shape());
    let xd = x.data();
    let god = gout.data();
    let gxd = gx.data_mut();
    let gsd = gs.data_mut();
    let plane = s.h * s.w;
    for n in 0..s.n {
        for c in 0..s.c {
            let a = sl[c];
            let base = (n * s.c + c) * plane;
            let mut acc = gsd[c];
            for i in 0..plane {
                let v = xd[base + i];
                let g = god[base + i];
                if v >= T::zero() {
                    gxd[base + i] = g;
                } else {
                    gxd[base + i] = a * g;
                    acc = acc + g * v;
                }
            }
            gsd[c] = acc;
        }
    }
    (gx, gs)
}

pub(crate) fn relu_forward<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v >= T::zero() { v } else { T::zero() })
}

pub(crate) fn relu_backward<T: Element>(x: &Tensor<T>, gout: &Tensor<T>) -> Tensor<T> {
    let mut gx = Tensor::zeros(x.shape());
    for ((g, xv), d) in gout.data().iter().zip(x.data()).zip(gx.data_mut()) {
        *d = if *xv >= T::zero() { *g } else { T::zero() };
    }
    gx
}

/// Numerically stable logistic function, evaluated per element without
/// overflowing for large-magnitude inputs.
pub(crate) fn sigmoid_forward<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| {
        if v >= T::zero() {
            T::one() / (T::one() + (-v).exp())
        } else {
            let e = v.exp();
            e / (T::one() + e)
        }
    })
}

/// Backward pass expressed through the forward output `y`: `g * y * (1 - y)`.
pub(crate) fn sigmoid_backward<T: Element>(y: &Tensor<T>, gout: &Tensor<T>) -> Tensor<T> {
    let mut gx = Tensor::zeros(y.shape());
    for ((g, yv), d) in gout.data().iter().zip(y.data()).zip(gx.data_mut()) {
        *d = *g * *yv * (T::one() - *yv);
    }
    gx
}

/// Fused three-factor broadcast product:
/// `out[n,c,h,w] = cw[n,c,0,0] * sw[n,0,h,w] * f[n,c,h,w]`.
pub(crate) fn broadcast_hadamard_forward<T: Element>(
    cw: &Tensor<T>,
    sw: &Tensor<T>,
    f: &Tensor<T>,
) -> Tensor<T> {
    let s = f.shape();
    let mut out = Tensor::zeros(s);
    let cwd = cw.data();
    let swd = sw.data();
    let fd = f.data();
    let od = out.data_mut();
    let plane = s.h * s.w;
    for n in 0..s.n {
        let swn = &swd[n * plane..(n + 1) * plane];
        for c in 0..s.c {
            let a = cwd[n * s.c + c];
            let base = (n * s.c + c) * plane;
            for i in 0..plane {
                od[base + i] = a * swn[i] * fd[base + i];
            }
        }
    }
    out
}

/// Product-rule backward of [`broadcast_hadamard_forward`]: three terms, one
/// per factor, each summed over the broadcast axes of that factor.
pub(crate) fn broadcast_hadamard_backward<T: Element>(
    cw: &Tensor<T>,
    sw: &Tensor<T>,
    f: &Tensor<T>,
    gout: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let s = f.shape();
    let mut gcw = Tensor::zeros(cw.shape());
    let mut gsw = Tensor::zeros(sw.shape());
    let mut gf = Tensor::zeros(s);
    let cwd = cw.data();
    let swd = sw.data();
    let fd = f.data();
    let gd = gout.data();
    let plane = s.h * s.w;
    {
        let gcwd = gcw.data_mut();
        let gswd = gsw.data_mut();
        let gfd = gf.data_mut();
        for n in 0..s.n {
            let swn = &swd[n * plane..(n + 1) * plane];
            let gswn = &mut gswd[n * plane..(n + 1) * plane];
            for c in 0..s.c {
                let a = cwd[n * s.c + c];
                let base = (n * s.c + c) * plane;
                let mut acc = T::zero();
                for i in 0..plane {
                    let g = gd[base + i];
                    let fv = fd[base + i];
                    acc = acc + g * swn[i] * fv;
                    gswn[i] = gswn[i] + g * a * fv;
                    gfd[base + i] = g * a * swn[i];
                }
                gcwd[n * s.c + c] = acc;
            }
        }
    }
    (gcw, gsw, gf)
}

/// Per-channel rescale: `out[n,c,h,w] = f[n,c,h,w] * cw[n,c,0,0]`.
pub(crate) fn scale_channels_forward<T: Element>(f: &Tensor<T>, cw: &Tensor<T>) -> Tensor<T> {
    let s = f.shape();
    let mut out = Tensor::zeros(s);
    let fd = f.data();
    let cwd = cw.data();
    let od = out.data_mut();
    let plane = s.h * s.w;
    for n in 0..s.n {
        for c in 0..s.c {
            let a = cwd[n * s.c + c];
            let base = (n * s.c + c) * plane;
            for i in 0..plane {
                od[base + i] = fd[base + i] * a;
            }
        }
    }
    out
}

pub(crate) fn scale_channels_backward<T: Element>(
    f: &Tensor<T>,
    cw: &Tensor<T>,
    gout: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    let s = f.shape();
    let mut gf = Tensor::zeros(s);
    let mut gcw = Tensor::zeros(cw.shape());
    let fd = f.data();
    let cwd = cw.data();
    let gd = gout.data();
    let plane = s.h * s.w;
    {
        let gfd = gf.data_mut();
        let gcwd = gcw.data_mut();
        for n in 0..s.n {
            for c in 0..s.c {
                let a = cwd[n * s.c + c];
                let base = (n * s.c + c) * plane;
                let mut acc = T::zero();
                for i in 0..plane {
                    let g = gd[base + i];
                    gfd[base + i] = g * a;
                    acc = acc + g * fd[base + i];
                }
                gcwd[n * s.c + c] = acc;
            }
        }
    }
    (gf, gcw)
}

/// Per-pixel rescale: `out[n,c,h,w] = f[n,c,h,w] * sw[n,0,h,w]`.
pub(crate) fn scale_spatial_forward<T: Element>(f: &Tensor<T>, sw: &Tensor<T>) -> Tensor<T> {
    let s = f.shape();
    let mut out = Tensor::zeros(s);
    let fd = f.data();
    let swd = sw.data();
    let od = out.data_mut();
    let plane = s.h * s.w;
    for n in 0..s.n {
        let swn = &swd[n * plane..(n + 1) * plane];
        for c in 0..s.c {
            let base = (n * s.c + c) * plane;
            for i in 0..plane {
                od[base + i] = fd[base + i] * swn[i];
            }
        }
    }
    out
}

pub(crate) fn scale_spatial_backward<T: Element>(
    f: &Tensor<T>,
    sw: &Tensor<T>,
    gout: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    let s = f.shape();
    let mut gf = Tensor::zeros(s);
    let mut gsw = Tensor::zeros(sw.shape());
    let fd = f.data();
    let swd = sw.data();
    let gd = gout.data();
    let plane = s.h * s.w;
    {
        let gfd = gf.data_mut();
        let gswd = gsw.data_mut();
        for n in 0..s.n {
            let swn = &swd[n * plane..(n + 1) * plane];
            let gswn = &mut gswd[n * plane..(n + 1) * plane];
            for c in 0..s.c {
                let base = (n * s.c + c) * plane;
                for i in 0..plane {
                    let g = gd[base + i];
                    gfd[base + i] = g * swn[i];
                    gswn[i] = gswn[i] + g * fd[base + i];
                }
            }
        }
    }
    (gf, gsw)
}

/// Sub-pixel rearrangement: `out[n, c, s*h + i, s*w + j] = in[n, c*s*s + i*s + j, h, w]`.
pub(crate) fn pixel_shuffle_forward<T: Element>(x: &Tensor<T>, s: usize) -> Tensor<T> {
    let xs = x.shape();
    let co = xs.c / (s * s);
    let out_shape = Shape::new(xs.n, co, xs.h * s, xs.w * s);
    let mut out = Tensor::zeros(out_shape);
    let xd = x.data();
    let od = out.data_mut();
    for n in 0..xs.n {
        for c in 0..co {
            for i in 0..s {
                for j in 0..s {
                    let src_c = c * s * s + i * s + j;
                    for h in 0..xs.h {
                        let src_base = ((n * xs.c + src_c) * xs.h + h) * xs.w;
                        let dst_base =
                            ((n * co + c) * out_shape.h + (s * h + i)) * out_shape.w + j;
                        for w in 0..xs.w {
                            od[dst_base + s * w] = xd[src_base + w];
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn pixel_shuffle_backward<T: Element>(
    x_shape: Shape,
    s: usize,
    gout: &Tensor<T>,
) -> Tensor<T> {
    let co = x_shape.c / (s * s);
    let gs = gout.shape();
    let mut gx = Tensor::zeros(x_shape);
    let gd = gx.data_mut();
    let god = gout.data();
    for n in 0..x_shape.n {
        for c in 0..co {
            for i in 0..s {
                for j in 0..s {
                    let src_c = c * s * s + i * s + j;
                    for h in 0..x_shape.h {
                        let dst_base = ((n * x_shape.c + src_c) * x_shape.h + h) * x_shape.w;
                        let src_base = ((n * co + c) * gs.h + (s * h + i)) * gs.w + j;
                        for w in 0..x_shape.w {
                            gd[dst_base + w] = god[src_base + s * w];
                        }
                    }
                }
            }
        }
    }
    gx
}

/// Concatenates two tensors along the channel axis.
pub(crate) fn concat_channels_forward<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let sa = a.shape();
    let sb = b.shape();
    let out_shape = Shape::new(sa.n, sa.c + sb.c, sa.h, sa.w);
    let mut out = Tensor::zeros(out_shape);
    let plane = sa.h * sa.w;
    let od = out.data_mut();
    for n in 0..sa.n {
        let dst = &mut od[n * out_shape.c * plane..][..out_shape.c * plane];
        dst[..sa.c * plane].copy_from_slice(&a.data()[n * sa.c * plane..][..sa.c * plane]);
        dst[sa.c * plane..].copy_from_slice(&b.data()[n * sb.c * plane..][..sb.c * plane]);
    }
    out
}

pub(crate) fn concat_channels_backward<T: Element>(
    a_shape: Shape,
    b_shape: Shape,
    gout: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    let mut ga = Tensor::zeros(a_shape);
    let mut gb = Tensor::zeros(b_shape);
    let plane = a_shape.h * a_shape.w;
    let god = gout.data();
    let cc = a_shape.c + b_shape.c;
    for n in 0..a_shape.n {
        let src = &god[n * cc * plane..][..cc * plane];
        ga.data_mut()[n * a_shape.c * plane..][..a_shape.c * plane]
            .copy_from_slice(&src[..a_shape.c * plane]);
        gb.data_mut()[n * b_shape.c * plane..][..b_shape.c * plane]
            .copy_from_slice(&src[a_shape.c * plane..]);
    }
    (ga, gb)
}

pub(crate) fn ew_add<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let mut out = Tensor::zeros(a.shape());
    for ((x, y), d) in a.data().iter().zip(b.data()).zip(out.data_mut()) {
        *d = *x + *y;
    }
    out
}

pub(crate) fn ew_sub<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let mut out = Tensor::zeros(a.shape());
    for ((x, y), d) in a.data().iter().zip(b.data()).zip(out.data_mut()) {
        *d = *x - *y;
    }
    out
}

pub(crate) fn ew_mul<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let mut out = Tensor::zeros(a.shape());
    for ((x, y), d) in a.data().iter().zip(b.data()).zip(out.data_mut()) {
        *d = *x * *y;
    }
    out
}

pub(crate) fn ew_scale<T: Element>(a: &Tensor<T>, s: T) -> Tensor<T> {
    a.map(|v| v * s)
}

/// Compensated (Neumaier) summation: scalar reductions keep far more
/// precision than a plain running sum, which matters when large reductions
/// sit under a finite-difference probe.
pub(crate) fn compensated_sum<T: Element>(values: impl Iterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in values {
        let next = sum + v;
        comp = comp
            + if sum.abs() >= v.abs() {
                (sum - next) + v
            } else {
                (v - next) + sum
            };
        sum = next;
    }
    sum + comp
}

/// Scalar sum of all elements, accumulated in row-major order.
pub(crate) fn sum_all<T: Element>(a: &Tensor<T>) -> T {
    compensated_sum(a.data().iter().copied())
}

/// Mean absolute difference. The subgradient of `|x|` at zero is zero.
pub(crate) fn l1_value<T: Element>(pred: &Tensor<T>, target: &Tensor<T>) -> T {
    let total = compensated_sum(
        pred.data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (*p - *t).abs()),
    );
    total / T::from_f64(pred.shape().count() as f64)
}

/// Gradients of [`l1_value`] w.r.t. prediction and target: `sign/(count)` with
/// `sign(0) = 0`.
pub(crate) fn l1_backward<T: Element>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    gout: T,
) -> (Tensor<T>, Tensor<T>) {
    let inv = gout / T::from_f64(pred.shape().count() as f64);
    let mut gp = Tensor::zeros(pred.shape());
    let mut gt = Tensor::zeros(target.shape());
    for ((p, t), (dp, dt)) in pred
        .data()
        .iter()
        .zip(target.data())
        .zip(gp.data_mut().iter_mut().zip(gt.data_mut().iter_mut()))
    {
        let d = *p - *t;
        let s = if d > T::zero() {
            inv
        } else if d < T::zero() {
            -inv
        } else {
            T::zero()
        };
        *dp = s;
        *dt = -s;
    }
    (gp, gt)
}
