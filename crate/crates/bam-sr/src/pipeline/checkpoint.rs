//! Checkpoint serialization.
//!
//! A checkpoint is one file: a UTF-8 text manifest followed by a raw blob
//! of little-endian 32-bit floats. The manifest lists, in order:
//!
//! ```text
//! srckpt v1
//! epoch <completed epochs>
//! seed <64 hex chars, ChaCha8 seed>
//! word_pos <decimal u128, ChaCha8 stream position>
//! network blocks=.. width=.. scale=.. attention=.. reduction=.. kernel=.. insertion=..
//! train patch=.. batch=.. epochs=.. lr0=.. halve=.. seed=.. scale=..
//! adam_step <global optimizer step count>
//! param <name> <NxCxHxW> <offset in floats>   (one per tensor)
//! blob <total float count>
//! <raw little-endian f32 bytes>
//! ```
//!
//! Network parameters come first in enumeration order, then `.adam_m` and
//! `.adam_v` moment tensors for each parameter in the same order (zeros when
//! the optimizer has not touched them). Offsets must be contiguous and the
//! blob length must match exactly; any deviation is rejected with a
//! diagnostic. Save -> load -> save reproduces the file byte for byte.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::{AttentionKind, AttentionSpec};
use crate::error::{Error, Result};
use crate::network::{Insertion, NetworkSpec, SrNetwork};
use crate::params::ParamSet;
use crate::tensor::{Shape, Tensor};

use super::adam::AdamState;
use super::TrainSpec;

pub const MAGIC: &str = "srckpt v1";

/// Mutable training progress stored alongside the parameters.
#[derive(Debug)]
pub struct TrainState {
    /// Completed epochs.
    pub epoch: usize,
    pub adam: AdamState<f32>,
    pub rng: ChaCha8Rng,
}

/// Everything a checkpoint restores.
#[derive(Debug)]
pub struct LoadedCheckpoint {
    pub net: SrNetwork<f32>,
    pub network_spec: NetworkSpec,
    pub train: TrainSpec,
    pub state: TrainState,
}

fn ckpt_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Checkpoint { path: path.to_path_buf(), msg: msg.into() }
}

fn network_line(spec: &NetworkSpec) -> String {
    format!(
        "network blocks={} width={} scale={} attention={} reduction={} kernel={} insertion={}",
        spec.blocks,
        spec.width,
        spec.scale,
        spec.attention.kind,
        spec.attention.reduction,
        spec.attention.spatial_kernel,
        spec.insertion,
    )
}

fn train_line(spec: &TrainSpec) -> String {
    format!(
        "train patch={} batch={} epochs={} lr0={} halve={} seed={} scale={}",
        spec.patch_size, spec.batch, spec.epochs, spec.lr0, spec.halve_period, spec.seed, spec.scale,
    )
}

fn parse_kv_line<'a>(path: &Path, line: &'a str, tag: &str, keys: &[&str]) -> Result<Vec<&'a str>> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(tag) {
        return Err(ckpt_err(path, format!("expected `{tag}` line, got `{line}`")));
    }
    let mut values = Vec::with_capacity(keys.len());
    for key in keys {
        let token = tokens
            .next()
            .ok_or_else(|| ckpt_err(path, format!("`{tag}` line is missing `{key}`")))?;
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| ckpt_err(path, format!("malformed `{tag}` entry `{token}`")))?;
        if k != *key {
            return Err(ckpt_err(path, format!("`{tag}` line: expected key `{key}`, got `{k}`")));
        }
        values.push(v);
    }
    if let Some(extra) = tokens.next() {
        return Err(ckpt_err(path, format!("`{tag}` line has unexpected token `{extra}`")));
    }
    Ok(values)
}

fn parse_network_line(path: &Path, line: &str) -> Result<NetworkSpec> {
    let v = parse_kv_line(
        path,
        line,
        "network",
        &["blocks", "width", "scale", "attention", "reduction", "kernel", "insertion"],
    )?;
    let num = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| ckpt_err(path, format!("invalid {what} `{s}`")))
    };
    let spec = NetworkSpec {
        blocks: num(v[0], "blocks")?,
        width: num(v[1], "width")?,
        scale: num(v[2], "scale")?,
        attention: AttentionSpec {
            kind: AttentionKind::from_str(v[3]).map_err(|e| ckpt_err(path, e.to_string()))?,
            channels: num(v[1], "width")?,
            reduction: num(v[4], "reduction")?,
            spatial_kernel: num(v[5], "kernel")?,
        },
        insertion: Insertion::from_str(v[6]).map_err(|e| ckpt_err(path, e.to_string()))?,
    };
    spec.validate().map_err(|e| ckpt_err(path, e.to_string()))?;
    Ok(spec)
}

fn parse_train_line(path: &Path, line: &str) -> Result<TrainSpec> {
    let v = parse_kv_line(
        path,
        line,
        "train",
        &["patch", "batch", "epochs", "lr0", "halve", "seed", "scale"],
    )?;
    let num = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| ckpt_err(path, format!("invalid {what} `{s}`")))
    };
    Ok(TrainSpec {
        patch_size: num(v[0], "patch")?,
        batch: num(v[1], "batch")?,
        epochs: num(v[2], "epochs")?,
        lr0: v[3]
            .parse::<f64>()
            .map_err(|_| ckpt_err(path, format!("invalid lr0 `{}`", v[3])))?,
        halve_period: num(v[4], "halve")?,
        seed: v[5]
            .parse::<u64>()
            .map_err(|_| ckpt_err(path, format!("invalid seed `{}`", v[5])))?,
        scale: num(v[6], "scale")?,
    })
}

fn parse_shape(path: &Path, s: &str) -> Result<Shape> {
    let dims: Vec<usize> = s
        .split('x')
        .map(|d| d.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| ckpt_err(path, format!("invalid shape `{s}`")))?;
    if dims.len() != 4 {
        return Err(ckpt_err(path, format!("shape `{s}` must have 4 dims")));
    }
    Ok(Shape::new(dims[0], dims[1], dims[2], dims[3]))
}

/// Writes the network, optimizer, RNG, and epoch state to one file.
pub fn save_checkpoint(
    path: &Path,
    net: &SrNetwork<f32>,
    train: &TrainSpec,
    state: &TrainState,
) -> Result<()> {
    let mut manifest = String::new();
    let mut blob: Vec<f32> = Vec::new();
    let _ = writeln!(manifest, "{MAGIC}");
    let _ = writeln!(manifest, "epoch {}", state.epoch);
    let seed_hex: String = state.rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
    let _ = writeln!(manifest, "seed {seed_hex}");
    let _ = writeln!(manifest, "word_pos {}", state.rng.get_word_pos());
    let _ = writeln!(manifest, "{}", network_line(net.spec()));
    let _ = writeln!(manifest, "{}", train_line(train));
    let _ = writeln!(manifest, "adam_step {}", state.adam.step_count());

    let mut push_tensor = |manifest: &mut String, name: &str, t: &Tensor<f32>| {
        let _ = writeln!(manifest, "param {name} {} {}", t.shape(), blob.len());
        blob.extend_from_slice(t.data());
    };
    let params = net.params();
    for p in &params {
        push_tensor(&mut manifest, p.name(), p.value());
    }
    for p in &params {
        let zeros = || (Tensor::zeros(p.shape()), Tensor::zeros(p.shape()));
        let (m, v) = state
            .adam
            .moments_of(p.name())
            .cloned()
            .unwrap_or_else(zeros);
        push_tensor(&mut manifest, &format!("{}.adam_m", p.name()), &m);
        push_tensor(&mut manifest, &format!("{}.adam_v", p.name()), &v);
    }
    let _ = writeln!(manifest, "blob {}", blob.len());

    let mut bytes = manifest.into_bytes();
    bytes.reserve(4 * blob.len());
    for v in &blob {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

struct ManifestEntry {
    name: String,
    shape: Shape,
    offset: usize,
}

fn take_line<'a>(path: &Path, bytes: &'a [u8], cursor: &mut usize) -> Result<&'a str> {
    if *cursor >= bytes.len() {
        return Err(ckpt_err(path, "manifest ended before the blob line"));
    }
    let rest = &bytes[*cursor..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| ckpt_err(path, "unterminated manifest line"))?;
    let line = std::str::from_utf8(&rest[..end])
        .map_err(|_| ckpt_err(path, "manifest is not valid UTF-8"))?;
    *cursor += end + 1;
    Ok(line)
}

/// Restores a checkpoint file, validating the manifest and blob exhaustively.
pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;

    let mut cursor = 0usize;

    if take_line(path, &bytes, &mut cursor)? != MAGIC {
        return Err(ckpt_err(path, format!("bad magic; expected `{MAGIC}`")));
    }
    let epoch_line = take_line(path, &bytes, &mut cursor)?;
    let epoch = epoch_line
        .strip_prefix("epoch ")
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| ckpt_err(path, format!("invalid epoch line `{epoch_line}`")))?;
    let seed_line = take_line(path, &bytes, &mut cursor)?;
    let seed_hex = seed_line
        .strip_prefix("seed ")
        .ok_or_else(|| ckpt_err(path, format!("invalid seed line `{seed_line}`")))?;
    if seed_hex.len() != 64 || !seed_hex.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(ckpt_err(path, "seed must be 64 hex characters"));
    }
    let mut seed = [0u8; 32];
    for (i, chunk) in seed_hex.as_bytes().chunks_exact(2).enumerate() {
        let s = std::str::from_utf8(chunk).expect("hex digits are ASCII");
        seed[i] = u8::from_str_radix(s, 16).expect("validated hex digits");
    }
    let word_line = take_line(path, &bytes, &mut cursor)?;
    let word_pos = word_line
        .strip_prefix("word_pos ")
        .and_then(|s| s.parse::<u128>().ok())
        .ok_or_else(|| ckpt_err(path, format!("invalid word_pos line `{word_line}`")))?;
    let network_spec = parse_network_line(path, take_line(path, &bytes, &mut cursor)?)?;
    let train = parse_train_line(path, take_line(path, &bytes, &mut cursor)?)?;
    if train.scale != network_spec.scale {
        return Err(ckpt_err(
            path,
            format!(
                "train scale {} disagrees with network scale {}",
                train.scale, network_spec.scale
            ),
        ));
    }
    let step_line = take_line(path, &bytes, &mut cursor)?;
    let adam_step = step_line
        .strip_prefix("adam_step ")
        .and_then(|s| s.parse::<u64>().ok())
        .ok_or_else(|| ckpt_err(path, format!("invalid adam_step line `{step_line}`")))?;

    let mut entries: Vec<ManifestEntry> = Vec::new();
    let mut expected_offset = 0usize;
    let total_floats;
    loop {
        let line = take_line(path, &bytes, &mut cursor)?;
        if let Some(count) = line.strip_prefix("blob ") {
            total_floats = count
                .parse::<usize>()
                .map_err(|_| ckpt_err(path, format!("invalid blob count `{count}`")))?;
            break;
        }
        let body = line
            .strip_prefix("param ")
            .ok_or_else(|| ckpt_err(path, format!("unexpected manifest line `{line}`")))?;
        let mut parts = body.split_whitespace();
        let (name, shape_s, offset_s) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(n), Some(s), Some(o), None) => (n, s, o),
            _ => return Err(ckpt_err(path, format!("malformed param line `{line}`"))),
        };
        let shape = parse_shape(path, shape_s)?;
        let offset = offset_s
            .parse::<usize>()
            .map_err(|_| ckpt_err(path, format!("invalid offset `{offset_s}`")))?;
        if offset != expected_offset {
            return Err(ckpt_err(
                path,
                format!("param `{name}` offset {offset} is not contiguous (expected {expected_offset})"),
            ));
        }
        expected_offset += shape.count();
        entries.push(ManifestEntry { name: name.to_owned(), shape, offset });
    }
    if total_floats != expected_offset {
        return Err(ckpt_err(
            path,
            format!("blob count {total_floats} disagrees with manifest total {expected_offset}"),
        ));
    }
    let raw = &bytes[cursor..];
    if raw.len() != 4 * total_floats {
        return Err(ckpt_err(
            path,
            format!("blob holds {} bytes, expected {}", raw.len(), 4 * total_floats),
        ));
    }
    let floats: Vec<f32> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let mut net = SrNetwork::<f32>::build(&network_spec, 0)
        .map_err(|e| ckpt_err(path, format!("manifest network spec is invalid: {e}")))?;
    let expected_names = net.param_names();
    let mut moments: HashMap<String, (Tensor<f32>, Tensor<f32>)> = HashMap::new();
    let mut seen_plain = 0usize;
    for entry in &entries {
        let slice = &floats[entry.offset..entry.offset + entry.shape.count()];
        let tensor = Tensor::new(entry.shape, slice.to_vec()).expect("length matches shape by construction");
        if let Some(base) = entry.name.strip_suffix(".adam_m") {
            let slot = moments.entry(base.to_owned()).or_insert_with(|| {
                (Tensor::zeros(entry.shape), Tensor::zeros(entry.shape))
            });
            slot.0 = tensor;
        } else if let Some(base) = entry.name.strip_suffix(".adam_v") {
            let slot = moments.entry(base.to_owned()).or_insert_with(|| {
                (Tensor::zeros(entry.shape), Tensor::zeros(entry.shape))
            });
            slot.1 = tensor;
        } else {
            net.set_param(&entry.name, tensor)
                .map_err(|e| ckpt_err(path, format!("param `{}`: {e}", entry.name)))?;
            seen_plain += 1;
        }
    }
    if seen_plain != expected_names.len() {
        return Err(ckpt_err(
            path,
            format!(
                "checkpoint stores {seen_plain} parameters, network needs {}",
                expected_names.len()
            ),
        ));
    }
    for (name, _) in &moments {
        if !expected_names.iter().any(|n| n == name) {
            return Err(ckpt_err(path, format!("moment tensors for unknown parameter `{name}`")));
        }
    }

    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_word_pos(word_pos);
    Ok(LoadedCheckpoint {
        net,
        network_spec,
        train,
        state: TrainState { epoch, adam: AdamState::from_parts(adam_step, moments), rng },
    })
}
