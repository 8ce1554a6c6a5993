//! A small residual super-resolution network hosting the attention modules.
//!
//! The host is deliberately minimal (EDSR-style, no batch normalization):
//! a 3x3 head conv lifts the RGB input to `width` channels, `blocks`
//! residual blocks (conv3x3 -> PReLU -> conv3x3, skip add) refine it, a tail
//! conv expands to `3 * scale^2` channels, and pixel shuffling rearranges
//! those into the upscaled RGB image. A global skip adds the bicubic
//! upscale of the input, so a network whose body and tail weights are zero
//! reproduces the bicubic baseline exactly.
//!
//! Attention is inserted per the placement policy: after every residual
//! block (`PerBlock`), once before upsampling (`PreUpsample`), both, or not
//! at all. The attention placement is the only structural difference
//! between paired specs, so A/B comparisons isolate the mechanism.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::{self, AttentionKind, AttentionModule, AttentionSpec};
use crate::error::{Error, Result};
use crate::params::{he_normal, ParamSet, Parameter};
use crate::resample::axis_taps;
use crate::tensor::{Element, Shape, Tensor, Var};

/// Where attention modules are placed in the host network.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Insertion {
    /// One attention module after every residual block.
    PerBlock,
    /// A single attention module between the body and the tail.
    PreUpsample,
    /// Both placements at once.
    Both,
    /// No attention anywhere.
    None,
}

impl fmt::Display for Insertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Insertion::PerBlock => "per_block",
            Insertion::PreUpsample => "pre_upsample",
            Insertion::Both => "both",
            Insertion::None => "none",
        };
        f.write_str(s)
    }
}

impl FromStr for Insertion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "per_block" => Ok(Insertion::PerBlock),
            "pre_upsample" => Ok(Insertion::PreUpsample),
            "both" => Ok(Insertion::Both),
            "none" => Ok(Insertion::None),
            other => Err(Error::config(format!(
                "unknown insertion policy `{other}` (expected per_block, pre_upsample, both, or none)"
            ))),
        }
    }
}

impl Insertion {
    pub fn per_block(&self) -> bool {
        matches!(self, Insertion::PerBlock | Insertion::Both)
    }
    pub fn pre_upsample(&self) -> bool {
        matches!(self, Insertion::PreUpsample | Insertion::Both)
    }
}

/// Architecture of one host network.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NetworkSpec {
    /// Residual block count (>= 1).
    pub blocks: usize,
    /// Feature channels carried through the body (>= 1).
    pub width: usize,
    /// Upscale factor, one of 2, 3, 4.
    pub scale: usize,
    /// Attention module hyper-parameters; `attention.channels` must equal
    /// `width` whenever attention is actually inserted.
    pub attention: AttentionSpec,
    /// Attention placement policy.
    pub insertion: Insertion,
}

impl NetworkSpec {
    /// A spec with no attention anywhere, for baselines and A/B twins.
    pub fn plain(blocks: usize, width: usize, scale: usize) -> Self {
        NetworkSpec {
            blocks,
            width,
            scale,
            attention: AttentionSpec::new(AttentionKind::None, width),
            insertion: Insertion::None,
        }
    }

    /// Same host with an attention mechanism inserted after every block.
    pub fn with_attention(mut self, kind: AttentionKind, insertion: Insertion) -> Self {
        self.attention = AttentionSpec::new(kind, self.width);
        self.insertion = insertion;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 {
            return Err(Error::invalid("NetworkSpec", "blocks must be >= 1"));
        }
        if self.width == 0 {
            return Err(Error::invalid("NetworkSpec", "width must be >= 1"));
        }
        if !matches!(self.scale, 2 | 3 | 4) {
            return Err(Error::invalid(
                "NetworkSpec",
                format!("scale must be 2, 3, or 4, got {}", self.scale),
            ));
        }
        if self.insertion != Insertion::None {
            if self.attention.kind == AttentionKind::None {
                return Err(Error::invalid(
                    "NetworkSpec",
                    "insertion requires an attention kind other than `none`",
                ));
            }
            if self.attention.channels != self.width {
                return Err(Error::invalid(
                    "NetworkSpec",
                    format!(
                        "attention channels ({}) must equal network width ({})",
                        self.attention.channels, self.width
                    ),
                ));
            }
            self.attention.validate()?;
        }
        Ok(())
    }

    /// Number of attention module instances this spec places.
    pub fn attention_sites(&self) -> usize {
        let mut sites = 0;
        if self.insertion.per_block() {
            sites += self.blocks;
        }
        if self.insertion.pre_upsample() {
            sites += 1;
        }
        sites
    }
}

/// Exact trainable parameter count of a network built from `spec`.
pub fn count_network_params(spec: &NetworkSpec) -> usize {
    let w = spec.width;
    let tail_out = 3 * spec.scale * spec.scale;
    let head = 9 * 3 * w + w;
    let block = (9 * w * w + w) + w + (9 * w * w + w);
    let tail = 9 * w * tail_out + tail_out;
    head + spec.blocks * block + tail + spec.attention_sites() * attention::count_params(&spec.attention)
}

/// Analytic forward cost in FLOPs for one `3 x h x w` input, under the same
/// convention as [`attention::count_flops`]. Mirrors the graph-walk cost of
/// an actual forward pass exactly.
pub fn count_network_flops(spec: &NetworkSpec, h: usize, w: usize) -> u64 {
    let width = spec.width as u64;
    let s = spec.scale;
    let hw = (h * w) as u64;
    let (sh, sw) = (s * h, s * w);
    let shw = (sh * sw) as u64;

    // Separable bicubic skip: horizontal pass emits 3*h*sw samples, vertical
    // 3*sh*sw, each costing 2 FLOPs per kernel tap.
    let htaps = axis_taps(w, sw) as u64;
    let vtaps = axis_taps(h, sh) as u64;
    let skip = 2 * htaps * 3 * (h as u64) * (sw as u64) + 2 * vtaps * 3 * shw;

    let head = 2 * 9 * 3 * width * hw;
    let block = 2 * 9 * width * width * hw  // conv1
        + width * hw                        // prelu
        + 2 * 9 * width * width * hw        // conv2
        + width * hw; // skip add
    let attn = attention::count_flops(&spec.attention, h, w);
    let per_block_attn = if spec.insertion.per_block() { attn } else { 0 };
    let pre_up_attn = if spec.insertion.pre_upsample() { attn } else { 0 };
    let tail_out = 3 * (s * s) as u64;
    let tail = 2 * 9 * width * tail_out * hw;
    let global_add = 3 * shw;

    skip + head
        + spec.blocks as u64 * (block + per_block_attn)
        + pre_up_attn
        + tail
        + global_add
}

/// One residual block's parameters plus its optional attention module.
#[derive(Debug)]
struct Block<T: Element> {
    convs: Vec<Parameter<T>>,
    attention: Option<AttentionModule<T>>,
}

/// A built host network with concrete parameters.
#[derive(Debug)]
pub struct SrNetwork<T: Element> {
    spec: NetworkSpec,
    head: Vec<Parameter<T>>,
    blocks: Vec<Block<T>>,
    pre_upsample: Option<AttentionModule<T>>,
    tail: Vec<Parameter<T>>,
}

fn named<'a, T: Element>(list: &'a [Parameter<T>], name: &str) -> &'a Var<T> {
    list.iter()
        .find(|p| p.name() == name)
        .unwrap_or_else(|| panic!("network is missing parameter `{name}`"))
        .var()
}

impl<T: Element> SrNetwork<T> {
    /// Builds a network with deterministic seeded initialization. Conv
    /// weights are He-normal (`std = sqrt(2 / fan_in)`) and biases zero,
    /// except the tail conv which starts at exactly zero so an untrained
    /// network emits the bicubic baseline unchanged; PReLU slopes start at
    /// 0.25. Draw order is fixed (head, blocks in order, pre-upsample
    /// attention, tail), so equal seeds give bit-identical parameters.
    pub fn build(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = spec.width;

        let head = vec![
            Parameter::new("head.weight", he_normal(Shape::new(w, 3, 3, 3), 9 * 3, &mut rng)),
            Parameter::new("head.bias", Tensor::zeros(Shape::new(1, w, 1, 1))),
        ];

        let mut blocks = Vec::with_capacity(spec.blocks);
        for i in 0..spec.blocks {
            let convs = vec![
                Parameter::new(
                    format!("block{i}.conv1.weight"),
                    he_normal(Shape::new(w, w, 3, 3), 9 * w, &mut rng),
                ),
                Parameter::new(format!("block{i}.conv1.bias"), Tensor::zeros(Shape::new(1, w, 1, 1))),
                Parameter::new(
                    format!("block{i}.prelu.slope"),
                    Tensor::full(Shape::new(1, w, 1, 1), T::from_f64(0.25)),
                ),
                Parameter::new(
                    format!("block{i}.conv2.weight"),
                    he_normal(Shape::new(w, w, 3, 3), 9 * w, &mut rng),
                ),
                Parameter::new(format!("block{i}.conv2.bias"), Tensor::zeros(Shape::new(1, w, 1, 1))),
            ];
            let attention = if spec.insertion.per_block() {
                Some(AttentionModule::new(spec.attention, &format!("block{i}.attn."), &mut rng)?)
            } else {
                None
            };
            blocks.push(Block { convs, attention });
        }

        let pre_upsample = if spec.insertion.pre_upsample() {
            Some(AttentionModule::new(spec.attention, "upsample.attn.", &mut rng)?)
        } else {
            None
        };

        let tail_out = 3 * spec.scale * spec.scale;
        let tail = vec![
            Parameter::new("tail.weight", Tensor::zeros(Shape::new(tail_out, w, 3, 3))),
            Parameter::new("tail.bias", Tensor::zeros(Shape::new(1, tail_out, 1, 1))),
        ];

        Ok(SrNetwork { spec: *spec, head, blocks, pre_upsample, tail })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Upscales a batch of RGB images: `N x 3 x H x W` in, `N x 3 x sH x sW`
    /// out. Outputs are left unclamped; clamping happens only when images
    /// are saved. Rejects inputs containing non-finite values.
    pub fn forward(&self, lr: &Var<T>) -> Result<Var<T>> {
        let shape = lr.shape();
        if shape.c != 3 {
            return Err(Error::shape("SrNetwork::forward", "N x 3 x H x W", shape));
        }
        if !lr.value().is_finite() {
            return Err(Error::NonFiniteInput { op: "SrNetwork::forward" });
        }
        let s = self.spec.scale;
        let skip = lr.bicubic_upscale(s)?;

        let mut x = lr.conv2d(named(&self.head, "head.weight"), named(&self.head, "head.bias"), 1)?;
        for (i, block) in self.blocks.iter().enumerate() {
            let y = x
                .conv2d(
                    named(&block.convs, &format!("block{i}.conv1.weight")),
                    named(&block.convs, &format!("block{i}.conv1.bias")),
                    1,
                )?
                .prelu(named(&block.convs, &format!("block{i}.prelu.slope")))?
                .conv2d(
                    named(&block.convs, &format!("block{i}.conv2.weight")),
                    named(&block.convs, &format!("block{i}.conv2.bias")),
                    1,
                )?;
            let mut y = y.add(&x)?;
            if let Some(att) = &block.attention {
                y = att.forward(&y)?;
            }
            x = y;
        }
        if let Some(att) = &self.pre_upsample {
            x = att.forward(&x)?;
        }

        let mut out = x.conv2d(named(&self.tail, "tail.weight"), named(&self.tail, "tail.bias"), 1)?;
        out = match s {
            2 | 3 => out.pixel_shuffle(s)?,
            // x4 runs two cascaded x2 shuffles over the single 48-channel
            // tail output.
            4 => out.pixel_shuffle(2)?.pixel_shuffle(2)?,
            _ => unreachable!("NetworkSpec::validate admits scales 2..=4"),
        };
        out.add(&skip)
    }

    /// Rebuilds the same architecture with every parameter cast to `U`
    /// (e.g. a checkpoint trained in f32 promoted to f64 for evaluation).
    pub fn cast<U: Element>(&self) -> SrNetwork<U> {
        let recast = |list: &[Parameter<T>]| -> Vec<Parameter<U>> {
            list.iter()
                .map(|p| Parameter::new(p.name().to_owned(), p.value().cast::<U>()))
                .collect()
        };
        SrNetwork {
            spec: self.spec,
            head: recast(&self.head),
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    convs: recast(&b.convs),
                    attention: b.attention.as_ref().map(|m| m.clone_cast::<U>()),
                })
                .collect(),
            pre_upsample: self.pre_upsample.as_ref().map(|m| m.clone_cast::<U>()),
            tail: recast(&self.tail),
        }
    }
}

impl<T: Element> ParamSet<T> for SrNetwork<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        let mut all: Vec<&Parameter<T>> = self.head.iter().collect();
        for block in &self.blocks {
            all.extend(block.convs.iter());
            if let Some(att) = &block.attention {
                all.extend(att.params());
            }
        }
        if let Some(att) = &self.pre_upsample {
            all.extend(att.params());
        }
        all.extend(self.tail.iter());
        all
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut all: Vec<&mut Parameter<T>> = self.head.iter_mut().collect();
        for block in &mut self.blocks {
            all.extend(block.convs.iter_mut());
            if let Some(att) = &mut block.attention {
                all.extend(att.params_mut());
            }
        }
        if let Some(att) = &mut self.pre_upsample {
            all.extend(att.params_mut());
        }
        all.extend(self.tail.iter_mut());
        all
    }
}
