//! Dense 4-D tensors and reverse-mode automatic differentiation.
//!
//! Every value in this crate is a rank-4 tensor laid out row-major as
//! `N x C x H x W` (batch, channels, height, width). Scalars are `1x1x1x1`,
//! per-channel vectors are `1xCx1x1`. Tensors are immutable once built;
//! operations allocate fresh outputs.
//!
//! [`Var`] wraps a tensor into a differentiation graph. Calling
//! [`Var::backward`] on a scalar loss returns a fresh [`Gradients`] map for
//! every reachable leaf; nothing is accumulated across calls.

mod autograd;
mod gradcheck;
pub(crate) mod kernels;

pub use autograd::{broadcast_hadamard, graph_flops, l1_loss, Gradients, NodeId, Var};
pub use gradcheck::{grad_check, grad_check_with_injected_fault, rel_error};

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Floating-point element type for tensors. Double precision is used for all
/// correctness and gradient tests; single precision is the training and
/// benchmarking type.
pub trait Element:
    num_traits::Float + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Element for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Element for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Rank-4 tensor shape `N x C x H x W`. All four extents are at least 1.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    /// Total number of elements.
    pub fn count(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    /// Row-major flat offset of `(n, c, h, w)`.
    #[inline]
    pub fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.c + c) * self.h + h) * self.w + w
    }

    pub(crate) fn validate(&self, op: &'static str) -> Result<()> {
        if self.n == 0 || self.c == 0 || self.h == 0 || self.w == 0 {
            return Err(Error::invalid(op, format!("zero-sized shape {self}")));
        }
        Ok(())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Dense row-major `N x C x H x W` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
}

static NEXT_NODE_ID: AtomicU64 = AtomicU64::new(1);

pub(crate) fn fresh_node_id() -> u64 {
    NEXT_NODE_ID.fetch_add(1, Ordering::Relaxed)
}

impl<T: Element> Tensor<T> {
    /// Builds a tensor from a flat row-major buffer. The buffer length must
    /// equal `shape.count()`.
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        shape.validate("Tensor::new")?;
        if data.len() != shape.count() {
            return Err(Error::invalid(
                "Tensor::new",
                format!("buffer has {} elements, shape {shape} needs {}", data.len(), shape.count()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: vec![T::zero(); shape.count()],
        }
    }

    pub fn full(shape: Shape, value: T) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.count()],
        }
    }

    /// Builds a tensor by evaluating `f(n, c, h, w)` at every coordinate.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.count());
        for n in 0..shape.n {
            for c in 0..shape.c {
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        data.push(f(n, c, h, w));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    /// A `1x1x1x1` scalar.
    pub fn scalar(value: T) -> Self {
        Tensor::full(Shape::new(1, 1, 1, 1), value)
    }

    /// Uniform samples in `[lo, hi)`, drawn in row-major order.
    pub fn rand_uniform(shape: Shape, lo: f64, hi: f64, rng: &mut impl rand::Rng) -> Self {
        let data = (0..shape.count())
            .map(|_| T::from_f64(rng.gen_range(lo..hi)))
            .collect();
        Tensor { shape, data }
    }

    /// Zero-mean Gaussian samples with the given standard deviation, drawn in
    /// row-major order.
    pub fn rand_normal(shape: Shape, std: f64, rng: &mut impl rand::Rng) -> Self {
        use rand_distr::Distribution;
        let dist = rand_distr::Normal::new(0.0f64, std).expect("std must be finite");
        let data = (0..shape.count())
            .map(|_| T::from_f64(dist.sample(rng)))
            .collect();
        Tensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Element at `(n, c, h, w)`.
    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        self.data[self.shape.index(n, c, h, w)]
    }

    /// Returns a copy with the element at `(n, c, h, w)` replaced. Tensors are
    /// immutable; this is the test-friendly way to perturb one coordinate.
    pub fn with_value_at(&self, n: usize, c: usize, h: usize, w: usize, value: T) -> Self {
        let mut out = self.clone();
        let idx = self.shape.index(n, c, h, w);
        out.data[idx] = value;
        out
    }

    /// Applies `f` to every element, producing a new tensor.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// True when every element is finite (no NaN or infinity).
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Casts elementwise through `f64` into another element type.
    pub fn cast<U: Element>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64((*v).to_f64())).collect(),
        }
    }

    /// Largest absolute element value.
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    /// Inverse of [`Var::pixel_shuffle`]: folds each `s x s` spatial block back
    /// into `s*s` consecutive channels, so that
    /// `pixel_unshuffle(pixel_shuffle(x, s), s) == x`.
    pub fn pixel_unshuffle(&self, s: usize) -> Result<Tensor<T>> {
        let sh = self.shape;
        if s == 0 || sh.h % s != 0 || sh.w % s != 0 {
            return Err(Error::invalid(
                "pixel_unshuffle",
                format!("spatial dims of {sh} not divisible by factor {s}"),
            ));
        }
        let out_shape = Shape::new(sh.n, sh.c * s * s, sh.h / s, sh.w / s);
        let mut out = Tensor::zeros(out_shape);
        for n in 0..sh.n {
            for c in 0..out_shape.c {
                let (base, i, j) = (c / (s * s), (c / s) % s, c % s);
                for h in 0..out_shape.h {
                    for w in 0..out_shape.w {
                        let v = self.at(n, base, s * h + i, s * w + j);
                        let idx = out_shape.index(n, c, h, w);
                        out.data[idx] = v;
                    }
                }
            }
        }
        Ok(out)
    }
}
