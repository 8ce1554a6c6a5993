//! Balanced-attention single-image super-resolution on the CPU.
//!
//! The crate builds up from a dense-tensor autograd core to a complete,
//! deterministic training and evaluation toolkit:
//!
//! - [`tensor`]: rank-4 `N x C x H x W` tensors, the differentiable op set
//!   (convolution, poolings, activations, sub-pixel shuffle, fused broadcast
//!   products), reverse-mode `backward`, and finite-difference gradient
//!   checking.
//! - [`attention`]: the balanced attention module — a channel branch driven
//!   by average pooling and a spatial branch driven by cross-channel max
//!   pooling, fused by broadcast multiplication — plus the ablation variants
//!   (plain channel attention, squeeze-excitation, and the sequential
//!   channel-then-spatial block), with closed-form parameter and FLOP counts.
//! - [`network`]: a small residual upscaling network hosting the attention
//!   modules, with a bicubic global skip.
//! - [`metrics`]: bicubic resampling, BT.601 luma conversion, PSNR and SSIM.
//! - [`pipeline`]: dataset ingest, five-crop expansion, aligned patch
//!   sampling with dihedral augmentation, Adam, the halving learning-rate
//!   schedule, deterministic training, and text-manifest checkpoints.
//! - [`bench`]: serial forward-latency measurement (median/p90/FPS).
//! - [`cli`]: the `bam-sr` binary's subcommands (`train`, `eval`, `infer`,
//!   `bench`, `count`, `gradcheck`) over a flat key=value config format.
//!
//! The runnable `examples/` directory is the front door: each example
//! demonstrates one capability end to end on synthetic data.

pub mod attention;
pub mod bench;
pub mod cli;
pub mod error;
pub mod imageio;
pub mod metrics;
pub mod network;
pub mod params;
pub mod pipeline;
pub mod resample;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
