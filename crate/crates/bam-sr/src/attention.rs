//! Balanced attention and its ablation variants.
//!
//! The balanced attention module runs two branches in parallel over a feature
//! map `F` and fuses them with one broadcast product:
//!
//! - the channel branch (average-pool attention): global average pooling to
//!   `N x C x 1 x 1`, a two-layer 1x1-conv bottleneck (reduce by `r`, PReLU,
//!   expand back), then a sigmoid — one weight per channel;
//! - the spatial branch (max-pool attention): cross-channel max pooling to
//!   `N x 1 x H x W`, a single `k x k` convolution, then a sigmoid — one
//!   weight per pixel;
//! - fusion: `out = channel ⊗ spatial ⊙ F`, broadcasting both weight tensors
//!   to the full feature shape.
//!
//! The pairing is deliberately complementary: average pooling summarizes each
//! channel for the channel weights while max pooling picks the strongest
//! responder per pixel for the spatial weights, so neither statistic is
//! reused. Three ablation variants are provided for comparison: plain channel
//! attention (`Ca`), squeeze-excitation (`Se`, same dataflow as `Ca` but
//! independently named and parameterized), and the sequential
//! channel-then-spatial block (`Cbam`).

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::{he_normal, ParamSet, Parameter};
use crate::tensor::{broadcast_hadamard, graph_flops, Element, Shape, Tensor, Var};

/// Which attention mechanism a module implements.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum AttentionKind {
    /// Balanced attention: parallel channel and spatial branches fused by a
    /// broadcast product.
    Bam,
    /// Channel attention: average pool, bottleneck MLP (ReLU middle),
    /// sigmoid, channel rescale.
    Ca,
    /// Squeeze-excitation: identical dataflow to `Ca`, kept as a separately
    /// named and parameterized variant.
    Se,
    /// Sequential channel-then-spatial attention: channel stage pools with
    /// both average and max through a shared MLP; spatial stage convolves the
    /// concatenated per-pixel mean and max.
    Cbam,
    /// No attention; callers bypass the module entirely.
    None,
}

impl fmt::Display for AttentionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttentionKind::Bam => "bam",
            AttentionKind::Ca => "ca",
            AttentionKind::Se => "se",
            AttentionKind::Cbam => "cbam",
            AttentionKind::None => "none",
        };
        f.write_str(s)
    }
}

impl FromStr for AttentionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bam" => Ok(AttentionKind::Bam),
            "ca" => Ok(AttentionKind::Ca),
            "se" => Ok(AttentionKind::Se),
            "cbam" => Ok(AttentionKind::Cbam),
            "none" => Ok(AttentionKind::None),
            other => Err(Error::config(format!(
                "unknown attention kind `{other}` (expected bam, ca, se, cbam, or none)"
            ))),
        }
    }
}

/// Hyper-parameters of one attention module.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct AttentionSpec {
    pub kind: AttentionKind,
    /// Feature channels `n` the module operates on.
    pub channels: usize,
    /// Channel-bottleneck reduction ratio `r`.
    pub reduction: usize,
    /// Spatial convolution kernel size `k` (odd).
    pub spatial_kernel: usize,
}

impl AttentionSpec {
    /// Spec with the publication defaults: reduction 16, spatial kernel 7.
    pub fn new(kind: AttentionKind, channels: usize) -> Self {
        AttentionSpec {
            kind,
            channels,
            reduction: 16,
            spatial_kernel: 7,
        }
    }

    /// Bottleneck width `max(1, floor(n / r))`.
    pub fn bottleneck(&self) -> usize {
        (self.channels / self.reduction).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::invalid("AttentionSpec", "channels must be >= 1"));
        }
        if self.reduction == 0 {
            return Err(Error::invalid("AttentionSpec", "reduction must be >= 1"));
        }
        if self.spatial_kernel == 0 || self.spatial_kernel % 2 == 0 {
            return Err(Error::invalid(
                "AttentionSpec",
                format!("spatial kernel must be odd, got {}", self.spatial_kernel),
            ));
        }
        Ok(())
    }
}

/// Exact trainable parameter count of a module with this spec.
///
/// Channel branch: `n*b + b` (reduce conv + bias), `b` (PReLU slopes),
/// `b*n + n` (expand conv + bias). Spatial branch: `k*k + 1`. The `Ca`/`Se`
/// variants drop the slope and spatial terms; `Cbam` has a two-channel
/// spatial conv (`2*k*k + 1`) and no slopes.
pub fn count_params(spec: &AttentionSpec) -> usize {
    let n = spec.channels;
    let b = spec.bottleneck();
    let k = spec.spatial_kernel;
    let mlp = (n * b + b) + (b * n + n);
    match spec.kind {
        AttentionKind::Bam => mlp + b + (k * k + 1),
        AttentionKind::Ca | AttentionKind::Se => mlp,
        AttentionKind::Cbam => mlp + (2 * k * k + 1),
        AttentionKind::None => 0,
    }
}

/// Analytic forward cost in FLOPs for one image (`N = 1`) of spatial size
/// `h x w`, under the crate-wide convention: one multiply-accumulate
/// = 2 FLOPs, convolutions cost `2*K*K*Cin*Cout*Hout*Wout`, poolings cost
/// their reduction size per output element, activations and elementwise ops
/// cost 1 FLOP per element, and the fused broadcast product costs 2 per
/// element.
pub fn count_flops(spec: &AttentionSpec, h: usize, w: usize) -> u64 {
    flops_breakdown(spec, h, w).into_iter().map(|(_, f)| f).sum()
}

/// Per-step decomposition of [`count_flops`], in forward execution order.
pub fn flops_breakdown(spec: &AttentionSpec, h: usize, w: usize) -> Vec<(&'static str, u64)> {
    let n = spec.channels as u64;
    let b = spec.bottleneck() as u64;
    let k = spec.spatial_kernel as u64;
    let hw = (h * w) as u64;
    match spec.kind {
        AttentionKind::Bam => vec![
            ("channel.avg_pool", n * hw),
            ("channel.reduce_conv", 2 * n * b),
            ("channel.prelu", b),
            ("channel.expand_conv", 2 * b * n),
            ("channel.sigmoid", n),
            ("spatial.max_pool", n * hw),
            ("spatial.conv", 2 * k * k * hw),
            ("spatial.sigmoid", hw),
            ("fuse.broadcast_product", 2 * n * hw),
        ],
        AttentionKind::Ca | AttentionKind::Se => vec![
            ("channel.avg_pool", n * hw),
            ("channel.reduce_conv", 2 * n * b),
            ("channel.relu", b),
            ("channel.expand_conv", 2 * b * n),
            ("channel.sigmoid", n),
            ("rescale.channels", n * hw),
        ],
        AttentionKind::Cbam => vec![
            ("channel.avg_pool", n * hw),
            ("channel.max_pool", n * hw),
            ("channel.mlp_avg_path", 2 * n * b + b + 2 * b * n),
            ("channel.mlp_max_path", 2 * n * b + b + 2 * b * n),
            ("channel.sum_paths", n),
            ("channel.sigmoid", n),
            ("rescale.channels", n * hw),
            ("spatial.mean_pool", n * hw),
            ("spatial.max_pool", n * hw),
            ("spatial.conv", 2 * k * k * 2 * hw),
            ("spatial.sigmoid", hw),
            ("rescale.spatial", n * hw),
        ],
        AttentionKind::None => vec![],
    }
}

/// One attention module instance with its trainable parameters.
#[derive(Debug)]
pub struct AttentionModule<T: Element> {
    spec: AttentionSpec,
    params: Vec<Parameter<T>>,
}

impl<T: Element> AttentionModule<T> {
    /// Builds a module with deterministic seeded initialization: conv weights
    /// are He-normal (`std = sqrt(2 / fan_in)`), biases zero, PReLU slopes
    /// 0.25. Parameter names are prefixed with `prefix` (use `""` standalone).
    pub fn new(spec: AttentionSpec, prefix: &str, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        let n = spec.channels;
        let b = spec.bottleneck();
        let k = spec.spatial_kernel;
        let mut params = Vec::new();
        let mut push = |name: String, t: Tensor<T>| params.push(Parameter::new(name, t));
        match spec.kind {
            AttentionKind::Bam => {
                push(format!("{prefix}acam.conv1.weight"), he_normal(Shape::new(b, n, 1, 1), n, rng));
                push(format!("{prefix}acam.conv1.bias"), Tensor::zeros(Shape::new(1, b, 1, 1)));
                push(
                    format!("{prefix}acam.prelu.slope"),
                    Tensor::full(Shape::new(1, b, 1, 1), T::from_f64(0.25)),
                );
                push(format!("{prefix}acam.conv2.weight"), he_normal(Shape::new(n, b, 1, 1), b, rng));
                push(format!("{prefix}acam.conv2.bias"), Tensor::zeros(Shape::new(1, n, 1, 1)));
                push(
                    format!("{prefix}msam.conv.weight"),
                    he_normal(Shape::new(1, 1, k, k), k * k, rng),
                );
                push(format!("{prefix}msam.conv.bias"), Tensor::zeros(Shape::new(1, 1, 1, 1)));
            }
            AttentionKind::Ca | AttentionKind::Se => {
                let tag = if spec.kind == AttentionKind::Ca { "ca" } else { "se" };
                push(format!("{prefix}{tag}.conv1.weight"), he_normal(Shape::new(b, n, 1, 1), n, rng));
                push(format!("{prefix}{tag}.conv1.bias"), Tensor::zeros(Shape::new(1, b, 1, 1)));
                push(format!("{prefix}{tag}.conv2.weight"), he_normal(Shape::new(n, b, 1, 1), b, rng));
                push(format!("{prefix}{tag}.conv2.bias"), Tensor::zeros(Shape::new(1, n, 1, 1)));
            }
            AttentionKind::Cbam => {
                push(format!("{prefix}cbam.mlp1.weight"), he_normal(Shape::new(b, n, 1, 1), n, rng));
                push(format!("{prefix}cbam.mlp1.bias"), Tensor::zeros(Shape::new(1, b, 1, 1)));
                push(format!("{prefix}cbam.mlp2.weight"), he_normal(Shape::new(n, b, 1, 1), b, rng));
                push(format!("{prefix}cbam.mlp2.bias"), Tensor::zeros(Shape::new(1, n, 1, 1)));
                push(
                    format!("{prefix}cbam.spatial.weight"),
                    he_normal(Shape::new(1, 2, k, k), 2 * k * k, rng),
                );
                push(format!("{prefix}cbam.spatial.bias"), Tensor::zeros(Shape::new(1, 1, 1, 1)));
            }
            AttentionKind::None => {
                return Err(Error::invalid(
                    "AttentionModule::new",
                    "kind `none` has no module; bypass attention instead",
                ));
            }
        }
        Ok(AttentionModule { spec, params })
    }

    pub fn spec(&self) -> AttentionSpec {
        self.spec
    }

    fn p(&self, suffix: &str) -> &Var<T> {
        self.params
            .iter()
            .find(|p| p.name().ends_with(suffix))
            .unwrap_or_else(|| panic!("attention module is missing parameter `{suffix}`"))
            .var()
    }

    fn check_input(&self, f: &Var<T>, op: &'static str) -> Result<()> {
        if f.shape().c != self.spec.channels {
            return Err(Error::shape(
                op,
                format!("{} channels", self.spec.channels),
                f.shape(),
            ));
        }
        Ok(())
    }

    /// Channel branch of balanced attention: average pool, reduce, PReLU,
    /// expand, sigmoid. Output `N x C x 1 x 1`, every weight strictly in
    /// (0, 1) for finite inputs.
    pub fn acam_forward(&self, f: &Var<T>) -> Result<Var<T>> {
        self.check_input(f, "acam_forward")?;
        let z = f
            .global_avg_pool()
            .conv2d(self.p("acam.conv1.weight"), self.p("acam.conv1.bias"), 0)?
            .prelu(self.p("acam.prelu.slope"))?
            .conv2d(self.p("acam.conv2.weight"), self.p("acam.conv2.bias"), 0)?;
        Ok(z.sigmoid())
    }

    /// Spatial branch of balanced attention: cross-channel max pool, `k x k`
    /// conv at padding `(k-1)/2`, sigmoid. Output `N x 1 x H x W`.
    pub fn msam_forward(&self, f: &Var<T>) -> Result<Var<T>> {
        self.check_input(f, "msam_forward")?;
        let k = self.spec.spatial_kernel;
        let z = f
            .channel_max_pool()
            .conv2d(self.p("msam.conv.weight"), self.p("msam.conv.bias"), (k - 1) / 2)?;
        Ok(z.sigmoid())
    }

    /// Balanced attention: `acam(F) ⊗ msam(F) ⊙ F`. The two branches are
    /// independent (either evaluation order yields the same graph), and the
    /// fused product's backward pass is the three-term product rule.
    pub fn bam_forward(&self, f: &Var<T>) -> Result<Var<T>> {
        let channel = self.acam_forward(f)?;
        let spatial = self.msam_forward(f)?;
        broadcast_hadamard(&channel, &spatial, f)
    }

    /// Channel-attention / squeeze-excitation dataflow: average pool,
    /// bottleneck MLP with ReLU middle, sigmoid, per-channel rescale.
    fn ca_se_forward(&self, f: &Var<T>, tag: &str) -> Result<Var<T>> {
        let w1 = format!("{tag}.conv1.weight");
        let b1 = format!("{tag}.conv1.bias");
        let w2 = format!("{tag}.conv2.weight");
        let b2 = format!("{tag}.conv2.bias");
        let z = f
            .global_avg_pool()
            .conv2d(self.p(&w1), self.p(&b1), 0)?
            .relu()
            .conv2d(self.p(&w2), self.p(&b2), 0)?
            .sigmoid();
        f.scale_channels(&z)
    }

    /// Sequential channel-then-spatial attention. Channel stage: average and
    /// max pooled descriptors through a shared MLP, summed before the
    /// sigmoid, then a channel rescale. Spatial stage on the refined
    /// features: per-pixel channel mean and max concatenated to two channels,
    /// a `k x k` conv down to one, sigmoid, spatial rescale.
    fn cbam_forward(&self, f: &Var<T>) -> Result<Var<T>> {
        let k = self.spec.spatial_kernel;
        let mlp = |x: Var<T>| -> Result<Var<T>> {
            x.conv2d(self.p("cbam.mlp1.weight"), self.p("cbam.mlp1.bias"), 0)?
                .relu()
                .conv2d(self.p("cbam.mlp2.weight"), self.p("cbam.mlp2.bias"), 0)
        };
        let avg_path = mlp(f.global_avg_pool())?;
        let max_path = mlp(f.global_max_pool())?;
        let channel_weights = avg_path.add(&max_path)?.sigmoid();
        let refined = f.scale_channels(&channel_weights)?;

        let descriptor = refined
            .channel_mean_pool()
            .concat_channels(&refined.channel_max_pool())?;
        let spatial_weights = descriptor
            .conv2d(self.p("cbam.spatial.weight"), self.p("cbam.spatial.bias"), (k - 1) / 2)?
            .sigmoid();
        refined.scale_spatial(&spatial_weights)
    }

    /// The same module with every parameter cast to element type `U`.
    pub fn clone_cast<U: Element>(&self) -> AttentionModule<U> {
        AttentionModule {
            spec: self.spec,
            params: self
                .params
                .iter()
                .map(|p| Parameter::new(p.name().to_owned(), p.value().cast::<U>()))
                .collect(),
        }
    }

    /// Applies the module's attention mechanism to a feature map, preserving
    /// its shape. Rejects `kind = none`; callers bypass attention instead.
    pub fn forward(&self, f: &Var<T>) -> Result<Var<T>> {
        self.check_input(f, "attention forward")?;
        match self.spec.kind {
            AttentionKind::Bam => self.bam_forward(f),
            AttentionKind::Ca => self.ca_se_forward(f, "ca"),
            AttentionKind::Se => self.ca_se_forward(f, "se"),
            AttentionKind::Cbam => self.cbam_forward(f),
            AttentionKind::None => Err(Error::invalid(
                "attention forward",
                "kind `none` cannot be applied",
            )),
        }
    }
}

impl<T: Element> ParamSet<T> for AttentionModule<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        self.params.iter().collect()
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        self.params.iter_mut().collect()
    }
}

/// FLOPs actually spent by one forward pass at `N = 1`, measured by walking
/// the recorded op graph and costing each node from its real shapes. This is
/// the execution-side counterpart of the analytic [`count_flops`].
pub fn measured_flops<T: Element>(module: &AttentionModule<T>, h: usize, w: usize) -> Result<u64> {
    let input = Var::constant(Tensor::full(
        Shape::new(1, module.spec.channels, h, w),
        T::from_f64(0.5),
    ));
    let out = module.forward(&input)?;
    Ok(graph_flops(&out))
}
