//! Reverse-mode differentiation over a dynamically recorded op graph.
//!
//! Each [`Var`] owns its value and remembers the operation that produced it,
//! holding reference-counted handles to its operands; the graph is the DAG of
//! those handles. [`Var::backward`] walks the graph once in reverse
//! topological order and returns a fresh [`Gradients`] map — gradients are
//! never accumulated across calls, so repeated `backward` invocations are
//! independent by construction.

use std::collections::HashMap;
use std::rc::Rc;

use super::kernels;
use super::{fresh_node_id, Element, Shape, Tensor};
use crate::error::{Error, Result};
use crate::resample;

/// Identity of a graph node; stable for the lifetime of the [`Var`].
pub type NodeId = u64;

pub(crate) enum Op<T: Element> {
    Leaf { requires_grad: bool },
    Add(Var<T>, Var<T>),
    Sub(Var<T>, Var<T>),
    Mul(Var<T>, Var<T>),
    Scale(Var<T>, T),
    Sum(Var<T>),
    L1Loss(Var<T>, Var<T>),
    Sigmoid(Var<T>),
    Relu(Var<T>),
    Prelu { input: Var<T>, slope: Var<T> },
    Conv2d { input: Var<T>, weight: Var<T>, bias: Var<T>, padding: usize },
    GlobalAvgPool(Var<T>),
    GlobalMaxPool(Var<T>),
    ChannelMaxPool(Var<T>),
    ChannelMeanPool(Var<T>),
    BroadcastHadamard { channel: Var<T>, spatial: Var<T>, features: Var<T> },
    ScaleChannels { features: Var<T>, channel: Var<T> },
    ScaleSpatial { features: Var<T>, spatial: Var<T> },
    PixelShuffle { input: Var<T>, factor: usize },
    BicubicUpscale { input: Var<T> },
    ConcatChannels(Var<T>, Var<T>),
}

struct Node<T: Element> {
    id: NodeId,
    value: Tensor<T>,
    op: Op<T>,
}

/// A tensor enrolled in the differentiation graph.
///
/// Cloning a `Var` clones a handle to the same node, not the data.
pub struct Var<T: Element> {
    node: Rc<Node<T>>,
}

impl<T: Element> std::fmt::Debug for Var<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id())
            .field("shape", &self.shape())
            .finish_non_exhaustive()
    }
}

impl<T: Element> Clone for Var<T> {
    fn clone(&self) -> Self {
        Var {
            node: Rc::clone(&self.node),
        }
    }
}

impl<T: Element> Var<T> {
    fn from_op(value: Tensor<T>, op: Op<T>) -> Self {
        Var {
            node: Rc::new(Node {
                id: fresh_node_id(),
                value,
                op,
            }),
        }
    }

    /// A leaf that participates in differentiation: `backward` will report a
    /// gradient for it. Use for network inputs under test and for parameters.
    pub fn input(value: Tensor<T>) -> Self {
        Var::from_op(value, Op::Leaf { requires_grad: true })
    }

    /// A leaf excluded from differentiation (training batches, loss targets).
    /// Backward passes prune whole subgraphs that only feed constants.
    pub fn constant(value: Tensor<T>) -> Self {
        Var::from_op(value, Op::Leaf { requires_grad: false })
    }

    pub fn id(&self) -> NodeId {
        self.node.id
    }

    pub fn value(&self) -> &Tensor<T> {
        &self.node.value
    }

    pub fn shape(&self) -> Shape {
        self.node.value.shape()
    }

    /// The scalar payload of a `1x1x1x1` value.
    pub fn scalar_value(&self) -> Result<T> {
        if self.shape() != Shape::new(1, 1, 1, 1) {
            return Err(Error::invalid(
                "scalar_value",
                format!("expected 1x1x1x1, got {}", self.shape()),
            ));
        }
        Ok(self.value().data()[0])
    }

    fn binary_same_shape(op: &'static str, a: &Var<T>, b: &Var<T>) -> Result<()> {
        if a.shape() != b.shape() {
            return Err(Error::shape(op, a.shape(), b.shape()));
        }
        Ok(())
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&self, other: &Var<T>) -> Result<Var<T>> {
        Self::binary_same_shape("add", self, other)?;
        Ok(Var::from_op(
            kernels::ew_add(self.value(), other.value()),
            Op::Add(self.clone(), other.clone()),
        ))
    }

    /// Elementwise difference of two same-shape tensors.
    pub fn sub(&self, other: &Var<T>) -> Result<Var<T>> {
        Self::binary_same_shape("sub", self, other)?;
        Ok(Var::from_op(
            kernels::ew_sub(self.value(), other.value()),
            Op::Sub(self.clone(), other.clone()),
        ))
    }

    /// Elementwise (Hadamard) product of two same-shape tensors.
    pub fn mul(&self, other: &Var<T>) -> Result<Var<T>> {
        Self::binary_same_shape("mul", self, other)?;
        Ok(Var::from_op(
            kernels::ew_mul(self.value(), other.value()),
            Op::Mul(self.clone(), other.clone()),
        ))
    }

    /// Multiplication by a compile-time-known scalar.
    pub fn scale(&self, s: T) -> Var<T> {
        Var::from_op(
            kernels::ew_scale(self.value(), s),
            Op::Scale(self.clone(), s),
        )
    }

    /// Sum of every element, as a `1x1x1x1` scalar.
    pub fn sum(&self) -> Var<T> {
        Var::from_op(
            Tensor::scalar(kernels::sum_all(self.value())),
            Op::Sum(self.clone()),
        )
    }

    /// Direct stride-1 convolution with zero padding.
    ///
    /// `self: N x Cin x H x W`, `weight: Cout x Cin x K x K`,
    /// `bias: 1 x Cout x 1 x 1`. The output spatial extent is
    /// `H + 2*padding - K + 1` (and likewise for width) and must stay >= 1.
    pub fn conv2d(&self, weight: &Var<T>, bias: &Var<T>, padding: usize) -> Result<Var<T>> {
        let xs = self.shape();
        let ws = weight.shape();
        if ws.h != ws.w {
            return Err(Error::invalid(
                "conv2d",
                format!("kernel must be square, got {ws}"),
            ));
        }
        if ws.c != xs.c {
            return Err(Error::shape(
                "conv2d",
                format!("weight with Cin = {}", xs.c),
                ws,
            ));
        }
        let bs = bias.shape();
        if bs != Shape::new(1, ws.n, 1, 1) {
            return Err(Error::shape("conv2d", Shape::new(1, ws.n, 1, 1), bs));
        }
        let k = ws.h;
        if xs.h + 2 * padding < k || xs.w + 2 * padding < k {
            return Err(Error::invalid(
                "conv2d",
                format!("kernel {k}x{k} larger than padded input {xs} (pad {padding})"),
            ));
        }
        Ok(Var::from_op(
            kernels::conv2d_forward(self.value(), weight.value(), bias.value(), padding),
            Op::Conv2d {
                input: self.clone(),
                weight: weight.clone(),
                bias: bias.clone(),
                padding,
            },
        ))
    }

    /// Spatial mean per channel: `N x C x H x W -> N x C x 1 x 1`.
    pub fn global_avg_pool(&self) -> Var<T> {
        Var::from_op(
            kernels::global_avg_pool_forward(self.value()),
            Op::GlobalAvgPool(self.clone()),
        )
    }

    /// Spatial maximum per channel: `N x C x H x W -> N x C x 1 x 1`.
    /// Gradient flows only to the first maximizing position per channel.
    pub fn global_max_pool(&self) -> Var<T> {
        Var::from_op(
            kernels::global_max_pool_forward(self.value()),
            Op::GlobalMaxPool(self.clone()),
        )
    }

    /// Cross-channel maximum per pixel: `N x C x H x W -> N x 1 x H x W`.
    /// Gradient flows only to the winning channel; ties resolve to the lowest
    /// channel index.
    pub fn channel_max_pool(&self) -> Var<T> {
        Var::from_op(
            kernels::channel_max_pool_forward(self.value()),
            Op::ChannelMaxPool(self.clone()),
        )
    }

    /// Cross-channel mean per pixel: `N x C x H x W -> N x 1 x H x W`.
    pub fn channel_mean_pool(&self) -> Var<T> {
        Var::from_op(
            kernels::channel_mean_pool_forward(self.value()),
            Op::ChannelMeanPool(self.clone()),
        )
    }

    /// Parametric ReLU with one learnable slope per channel
    /// (`slope: 1 x C x 1 x 1`). At exactly zero the derivative is 1.
    pub fn prelu(&self, slope: &Var<T>) -> Result<Var<T>> {
        let ss = slope.shape();
        if ss != Shape::new(1, self.shape().c, 1, 1) {
            return Err(Error::shape(
                "prelu",
                Shape::new(1, self.shape().c, 1, 1),
                ss,
            ));
        }
        Ok(Var::from_op(
            kernels::prelu_forward(self.value(), slope.value()),
            Op::Prelu {
                input: self.clone(),
                slope: slope.clone(),
            },
        ))
    }

    /// Rectified linear unit. At exactly zero the derivative is 1, matching
    /// the `prelu` convention.
    pub fn relu(&self) -> Var<T> {
        Var::from_op(kernels::relu_forward(self.value()), Op::Relu(self.clone()))
    }

    /// Numerically stable logistic function.
    pub fn sigmoid(&self) -> Var<T> {
        Var::from_op(
            kernels::sigmoid_forward(self.value()),
            Op::Sigmoid(self.clone()),
        )
    }

    /// Per-channel rescale by a `N x C x 1 x 1` weight tensor.
    pub fn scale_channels(&self, channel: &Var<T>) -> Result<Var<T>> {
        let s = self.shape();
        if channel.shape() != Shape::new(s.n, s.c, 1, 1) {
            return Err(Error::shape(
                "scale_channels",
                Shape::new(s.n, s.c, 1, 1),
                channel.shape(),
            ));
        }
        Ok(Var::from_op(
            kernels::scale_channels_forward(self.value(), channel.value()),
            Op::ScaleChannels {
                features: self.clone(),
                channel: channel.clone(),
            },
        ))
    }

    /// Per-pixel rescale by a `N x 1 x H x W` weight tensor.
    pub fn scale_spatial(&self, spatial: &Var<T>) -> Result<Var<T>> {
        let s = self.shape();
        if spatial.shape() != Shape::new(s.n, 1, s.h, s.w) {
            return Err(Error::shape(
                "scale_spatial",
                Shape::new(s.n, 1, s.h, s.w),
                spatial.shape(),
            ));
        }
        Ok(Var::from_op(
            kernels::scale_spatial_forward(self.value(), spatial.value()),
            Op::ScaleSpatial {
                features: self.clone(),
                spatial: spatial.clone(),
            },
        ))
    }

    /// Sub-pixel rearrangement `N x C*s*s x H x W -> N x C x s*H x s*W` with
    /// `out[n, c, s*h + i, s*w + j] = in[n, c*s*s + i*s + j, h, w]`.
    pub fn pixel_shuffle(&self, factor: usize) -> Result<Var<T>> {
        let s = self.shape();
        if factor == 0 || s.c % (factor * factor) != 0 {
            return Err(Error::invalid(
                "pixel_shuffle",
                format!("channel count {} not divisible by {}^2", s.c, factor),
            ));
        }
        Ok(Var::from_op(
            kernels::pixel_shuffle_forward(self.value(), factor),
            Op::PixelShuffle {
                input: self.clone(),
                factor,
            },
        ))
    }

    /// Cubic-kernel upscale of every plane by an integer factor. Linear in
    /// the input; used for the network's global skip connection.
    pub fn bicubic_upscale(&self, factor: usize) -> Result<Var<T>> {
        if factor == 0 {
            return Err(Error::invalid("bicubic_upscale", "factor must be >= 1"));
        }
        let s = self.shape();
        Ok(Var::from_op(
            resample::resize_tensor(self.value(), s.h * factor, s.w * factor),
            Op::BicubicUpscale { input: self.clone() },
        ))
    }

    /// Concatenates `self` and `other` along the channel axis.
    pub fn concat_channels(&self, other: &Var<T>) -> Result<Var<T>> {
        let (a, b) = (self.shape(), other.shape());
        if a.n != b.n || a.h != b.h || a.w != b.w {
            return Err(Error::shape("concat_channels", a, b));
        }
        Ok(Var::from_op(
            kernels::concat_channels_forward(self.value(), other.value()),
            Op::ConcatChannels(self.clone(), other.clone()),
        ))
    }

    /// Reverse-mode gradients of this scalar with respect to every reachable
    /// differentiable leaf. Each call performs one full fresh pass; gradients
    /// from earlier calls are never reused or accumulated.
    pub fn backward(&self) -> Result<Gradients<T>> {
        if self.shape() != Shape::new(1, 1, 1, 1) {
            return Err(Error::NonScalarLoss { shape: self.shape() });
        }
        let order = topo_order(self);

        // A node needs a gradient when any leaf under it requires one.
        let mut needs: HashMap<NodeId, bool> = HashMap::with_capacity(order.len());
        for var in &order {
            let n = match &var.node.op {
                Op::Leaf { requires_grad } => *requires_grad,
                op => operands(op).iter().any(|v| needs[&v.id()]),
            };
            needs.insert(var.id(), n);
        }

        let mut grads: HashMap<NodeId, Tensor<T>> = HashMap::new();
        grads.insert(self.id(), Tensor::scalar(T::one()));

        for var in order.iter().rev() {
            if !needs[&var.id()] {
                continue;
            }
            let node = &var.node;
            if matches!(node.op, Op::Leaf { .. }) {
                continue; // leaf gradients stay in the map as results
            }
            let Some(g) = grads.remove(&node.id) else {
                continue; // dead branch: contributes to nothing above
            };
            macro_rules! push {
                ($v:expr, $t:expr) => {
                    if needs[&$v.id()] {
                        accumulate(&mut grads, $v.id(), $t);
                    }
                };
            }
            match &node.op {
                Op::Leaf { .. } => unreachable!(),
                Op::Add(a, b) => {
                    push!(a, g.clone());
                    push!(b, g);
                }
                Op::Sub(a, b) => {
                    push!(b, kernels::ew_scale(&g, -T::one()));
                    push!(a, g);
                }
                Op::Mul(a, b) => {
                    push!(a, kernels::ew_mul(&g, b.value()));
                    push!(b, kernels::ew_mul(&g, a.value()));
                }
                Op::Scale(a, s) => push!(a, kernels::ew_scale(&g, *s)),
                Op::Sum(a) => push!(a, Tensor::full(a.shape(), g.data()[0])),
                Op::L1Loss(p, t) => {
                    let (gp, gt) = kernels::l1_backward(p.value(), t.value(), g.data()[0]);
                    push!(p, gp);
                    push!(t, gt);
                }
                Op::Sigmoid(a) => push!(a, kernels::sigmoid_backward(&node.value, &g)),
                Op::Relu(a) => push!(a, kernels::relu_backward(a.value(), &g)),
                Op::Prelu { input, slope } => {
                    let (gx, gs) = kernels::prelu_backward(input.value(), slope.value(), &g);
                    push!(input, gx);
                    push!(slope, gs);
                }
                Op::Conv2d { input, weight, bias, padding } => {
                    if needs[&input.id()] {
                        let gx = kernels::conv2d_backward_input(
                            input.shape(),
                            weight.value(),
                            *padding,
                            &g,
                        );
                        accumulate(&mut grads, input.id(), gx);
                    }
                    if needs[&weight.id()] || needs[&bias.id()] {
                        let (gw, gb) = kernels::conv2d_backward_params(
                            input.value(),
                            weight.shape(),
                            *padding,
                            &g,
                        );
                        push!(weight, gw);
                        push!(bias, gb);
                    }
                }
                Op::GlobalAvgPool(a) => push!(a, kernels::global_avg_pool_backward(a.value(), &g)),
                Op::GlobalMaxPool(a) => push!(a, kernels::global_max_pool_backward(a.value(), &g)),
                Op::ChannelMaxPool(a) => {
                    push!(a, kernels::channel_max_pool_backward(a.value(), &g))
                }
                Op::ChannelMeanPool(a) => {
                    push!(a, kernels::channel_mean_pool_backward(a.value(), &g))
                }
                Op::BroadcastHadamard { channel, spatial, features } => {
                    let (gc, gs, gf) = kernels::broadcast_hadamard_backward(
                        channel.value(),
                        spatial.value(),
                        features.value(),
                        &g,
                    );
                    push!(channel, gc);
                    push!(spatial, gs);
                    push!(features, gf);
                }
                Op::ScaleChannels { features, channel } => {
                    let (gf, gc) =
                        kernels::scale_channels_backward(features.value(), channel.value(), &g);
                    push!(features, gf);
                    push!(channel, gc);
                }
                Op::ScaleSpatial { features, spatial } => {
                    let (gf, gs) =
                        kernels::scale_spatial_backward(features.value(), spatial.value(), &g);
                    push!(features, gf);
                    push!(spatial, gs);
                }
                Op::PixelShuffle { input, factor } => {
                    push!(input, kernels::pixel_shuffle_backward(input.shape(), *factor, &g));
                }
                Op::BicubicUpscale { input } => {
                    push!(input, resample::resize_tensor_backward(input.shape(), &g));
                }
                Op::ConcatChannels(a, b) => {
                    let (ga, gb) = kernels::concat_channels_backward(a.shape(), b.shape(), &g);
                    push!(a, ga);
                    push!(b, gb);
                }
            }
        }

        // Only leaf gradients remain: interior gradients were consumed above.
        let leaf_ids: std::collections::HashSet<NodeId> = order
            .iter()
            .filter(|v| matches!(v.node.op, Op::Leaf { .. }))
            .map(|v| v.id())
            .collect();
        grads.retain(|id, _| leaf_ids.contains(id));
        Ok(Gradients { map: grads })
    }
}

/// Fused three-factor broadcast product
/// `out[n,c,h,w] = channel[n,c,0,0] * spatial[n,0,h,w] * features[n,c,h,w]`,
/// the balanced-attention fusion step. Its backward pass is the three-term
/// product rule, one term per factor.
pub fn broadcast_hadamard<T: Element>(
    channel: &Var<T>,
    spatial: &Var<T>,
    features: &Var<T>,
) -> Result<Var<T>> {
    let f = features.shape();
    if channel.shape() != Shape::new(f.n, f.c, 1, 1) {
        return Err(Error::shape(
            "broadcast_hadamard",
            Shape::new(f.n, f.c, 1, 1),
            channel.shape(),
        ));
    }
    if spatial.shape() != Shape::new(f.n, 1, f.h, f.w) {
        return Err(Error::shape(
            "broadcast_hadamard",
            Shape::new(f.n, 1, f.h, f.w),
            spatial.shape(),
        ));
    }
    Ok(Var::from_op(
        kernels::broadcast_hadamard_forward(channel.value(), spatial.value(), features.value()),
        Op::BroadcastHadamard {
            channel: channel.clone(),
            spatial: spatial.clone(),
            features: features.clone(),
        },
    ))
}

/// Mean absolute error between two same-shape tensors, as a scalar. The
/// subgradient of `|x|` at zero is zero.
pub fn l1_loss<T: Element>(prediction: &Var<T>, target: &Var<T>) -> Result<Var<T>> {
    if prediction.shape() != target.shape() {
        return Err(Error::shape("l1_loss", prediction.shape(), target.shape()));
    }
    Ok(Var::from_op(
        Tensor::scalar(kernels::l1_value(prediction.value(), target.value())),
        Op::L1Loss(prediction.clone(), target.clone()),
    ))
}

fn operands<'a, T: Element>(op: &'a Op<T>) -> Vec<&'a Var<T>> {
    match op {
        Op::Leaf { .. } => vec![],
        Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::L1Loss(a, b) | Op::ConcatChannels(a, b) => {
            vec![a, b]
        }
        Op::Scale(a, _) | Op::Sum(a) | Op::Sigmoid(a) | Op::Relu(a) => vec![a],
        Op::Prelu { input, slope } => vec![input, slope],
        Op::Conv2d { input, weight, bias, .. } => vec![input, weight, bias],
        Op::GlobalAvgPool(a)
        | Op::GlobalMaxPool(a)
        | Op::ChannelMaxPool(a)
        | Op::ChannelMeanPool(a) => vec![a],
        Op::BroadcastHadamard { channel, spatial, features } => vec![channel, spatial, features],
        Op::ScaleChannels { features, channel } => vec![features, channel],
        Op::ScaleSpatial { features, spatial } => vec![features, spatial],
        Op::PixelShuffle { input, .. } | Op::BicubicUpscale { input, .. } => vec![input],
    }
}

/// Post-order over the DAG rooted at `root` (operands before consumers),
/// deduplicated by node id. Iterative so deep graphs cannot overflow the
/// stack.
fn topo_order<T: Element>(root: &Var<T>) -> Vec<Var<T>> {
    let mut order = Vec::new();
    let mut state: HashMap<NodeId, bool> = HashMap::new(); // false = open, true = done
    let mut stack = vec![(root.clone(), false)];
    while let Some((var, children_done)) = stack.pop() {
        if children_done {
            if !state.get(&var.id()).copied().unwrap_or(false) {
                state.insert(var.id(), true);
                order.push(var);
            }
            continue;
        }
        if state.contains_key(&var.id()) {
            continue;
        }
        state.insert(var.id(), false);
        stack.push((var.clone(), true));
        for operand in operands(&var.node.op) {
            if !state.contains_key(&operand.id()) {
                stack.push((operand.clone(), false));
            }
        }
    }
    order
}

fn accumulate<T: Element>(map: &mut HashMap<NodeId, Tensor<T>>, id: NodeId, t: Tensor<T>) {
    match map.remove(&id) {
        Some(existing) => {
            map.insert(id, kernels::ew_add(&existing, &t));
        }
        None => {
            map.insert(id, t);
        }
    }
}

/// Gradient map produced by one `backward` call: one entry per reachable
/// differentiable leaf, shaped identically to the leaf's value.
pub struct Gradients<T: Element> {
    map: HashMap<NodeId, Tensor<T>>,
}

impl<T: Element> Gradients<T> {
    /// Gradient of the loss with respect to the given leaf, if it was
    /// reachable and marked differentiable.
    pub fn get(&self, var: &Var<T>) -> Option<&Tensor<T>> {
        self.map.get(&var.id())
    }

    pub fn get_by_id(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.map.get(&id)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Total floating-point operation count of the forward graph rooted at
/// `root`, per the crate-wide cost convention (see
/// [`crate::attention::count_flops`] for the analytic counterpart):
/// one multiply-accumulate = 2 FLOPs, convolutions cost
/// `2*K*K*Cin*Cout*Hout*Wout`, poolings cost their reduction size per output
/// element, activations and elementwise ops cost 1 FLOP per element, the
/// fused three-factor product costs 2, rearrangements are free, and the
/// separable cubic resampler costs 2 FLOPs per tap per produced sample.
pub fn graph_flops<T: Element>(root: &Var<T>) -> u64 {
    let order = topo_order(root);
    let mut total = 0u64;
    for var in &order {
        let out = var.shape();
        let out_count = out.count() as u64;
        total += match &var.node.op {
            Op::Leaf { .. } => 0,
            Op::Add(..) | Op::Sub(..) | Op::Mul(..) | Op::Scale(..) => out_count,
            Op::Sum(a) => a.shape().count() as u64,
            Op::L1Loss(p, _) => 2 * p.shape().count() as u64,
            Op::Sigmoid(_) | Op::Relu(_) | Op::Prelu { .. } => out_count,
            Op::Conv2d { input, weight, .. } => {
                let ws = weight.shape();
                let _ = input;
                2 * (ws.h * ws.w * ws.c * ws.n) as u64 * (out.h * out.w) as u64 * out.n as u64
            }
            Op::GlobalAvgPool(a) | Op::GlobalMaxPool(a) => {
                let s = a.shape();
                out_count * (s.h * s.w) as u64
            }
            Op::ChannelMaxPool(a) | Op::ChannelMeanPool(a) => {
                out_count * a.shape().c as u64
            }
            Op::BroadcastHadamard { .. } => 2 * out_count,
            Op::ScaleChannels { .. } | Op::ScaleSpatial { .. } => out_count,
            Op::PixelShuffle { .. } | Op::ConcatChannels(..) => 0,
            Op::BicubicUpscale { input, .. } => {
                let s = input.shape();
                let row_taps = resample::axis_taps(s.w, out.w) as u64;
                let col_taps = resample::axis_taps(s.h, out.h) as u64;
                let planes = (s.n * s.c) as u64;
                // Horizontal pass produces h x ow per plane, vertical oh x ow.
                2 * row_taps * planes * (s.h * out.w) as u64
                    + 2 * col_taps * planes * (out.h * out.w) as u64
            }
        };
    }
    total
}
