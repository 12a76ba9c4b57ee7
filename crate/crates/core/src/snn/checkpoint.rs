//! Checkpoint file format.
//!
//! A UTF-8 header of `key=value` lines closed by a line `end`, followed by a
//! little-endian binary payload: the f32 weights of every weighted layer in
//! order, then the f64 transform entries (row-major), then each optimizer
//! buffer as f32 over all weights.

use std::path::Path;

use nalgebra::DMatrix;

use super::arch::{Architecture, Shape};
use super::network::Network;
use crate::encoder::{EncoderKind, FrequencySchedule, InputEncoder, Normalization};
use crate::error::{parse, Error, Result};
use crate::transforms::{BlockSpec, TransformKind, TransformMatrix};

const MAGIC: &str = "dct-snn-checkpoint 1";
const MAX_HEADER: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ann,
    Snn,
}

/// Everything needed to rebuild the input encoder and its schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderMeta {
    pub kind: EncoderKind,
    pub normalization: Normalization,
    pub image_shape: (usize, usize, usize),
    pub block_size: usize,
    pub stride: usize,
    pub padding: usize,
    pub seed: u64,
    pub timesteps: usize,
    pub curtail: usize,
    pub gen_thresholds: Option<(f64, f64)>,
    /// Analysis matrix, row-major; `None` for Poisson.
    pub transform: Option<DMatrix<f64>>,
}

impl EncoderMeta {
    pub fn from_encoder(enc: &InputEncoder, schedule: &FrequencySchedule) -> Self {
        let spec = enc.block_spec();
        EncoderMeta {
            kind: enc.kind(),
            normalization: enc.normalization(),
            image_shape: enc.image_shape(),
            block_size: spec.block_size,
            stride: spec.stride,
            padding: spec.padding,
            seed: enc.seed(),
            timesteps: schedule.total_timesteps(),
            curtail: schedule.curtail(),
            gen_thresholds: enc.thresholds(),
            transform: enc.transform().map(|t| t.entries().clone()),
        }
    }

    pub fn encoder(&self) -> Result<InputEncoder> {
        let mut enc = match (self.kind, &self.transform) {
            (EncoderKind::Poisson, _) => {
                InputEncoder::poisson(self.image_shape, self.block_size, self.seed)?
            }
            (EncoderKind::Transform(k), Some(m)) => {
                let t = TransformMatrix::new(k, m.clone())?;
                let spec = BlockSpec::new(self.block_size, self.stride, self.padding)?;
                InputEncoder::with_transform(t, spec, self.image_shape)?
                    .with_normalization(self.normalization)
            }
            (EncoderKind::Transform(_), None) => {
                return Err(Error::invalid("transform encoder without a matrix"))
            }
        };
        if let Some((lo, hi)) = self.gen_thresholds {
            enc.set_thresholds(lo, hi)?;
        }
        Ok(enc)
    }

    pub fn schedule(&self) -> Result<FrequencySchedule> {
        FrequencySchedule::cyclic(self.block_size, self.curtail, self.timesteps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub name: String,
    pub step: u64,
    /// Each buffer spans all weights, layers concatenated in order.
    pub buffers: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub network: Network,
    /// Per LIF layer; empty for ANN checkpoints.
    pub thresholds: Vec<f32>,
    pub leak: f32,
    pub encoder: EncoderMeta,
    pub epoch: usize,
    pub optimizer: Option<OptimizerState>,
}

fn shape_str(s: (usize, usize, usize)) -> String {
    format!("{}x{}x{}", s.0, s.1, s.2)
}

fn list<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let e = &self.encoder;
        let input = self.network.arch.input_shape();
        let mut h = String::new();
        let mut kv = |k: &str, v: String| {
            h.push_str(k);
            h.push('=');
            h.push_str(&v);
            h.push('\n');
        };
        kv(
            "kind",
            match self.kind {
                ModelKind::Ann => "ann",
                ModelKind::Snn => "snn",
            }
            .into(),
        );
        kv("input", shape_str((input[0], input[1], input[2])));
        kv("arch", self.network.arch.descriptor());
        kv("leak", self.leak.to_string());
        kv("thresholds", list(&self.thresholds));
        kv("epoch", self.epoch.to_string());
        kv("encoder", e.kind.name().into());
        kv("normalization", e.normalization.name().into());
        kv("image", shape_str(e.image_shape));
        kv("block", e.block_size.to_string());
        kv("stride", e.stride.to_string());
        kv("padding", e.padding.to_string());
        kv("seed", e.seed.to_string());
        kv("timesteps", e.timesteps.to_string());
        kv("curtail", e.curtail.to_string());
        kv(
            "gen_thresholds",
            e.gen_thresholds
                .map_or("none".into(), |(a, b)| format!("{a},{b}")),
        );
        kv(
            "transform_dim",
            e.transform.as_ref().map_or(0, |m| m.nrows()).to_string(),
        );
        match &self.optimizer {
            Some(o) => {
                kv("optimizer", o.name.clone());
                kv("optimizer_step", o.step.to_string());
                kv("optimizer_buffers", o.buffers.len().to_string());
            }
            None => kv("optimizer", "none".into()),
        }
        let mut out = format!("{MAGIC}\n{h}end\n").into_bytes();
        for w in &self.network.weights {
            for v in w {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        if let Some(m) = &e.transform {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    out.extend_from_slice(&m[(r, c)].to_le_bytes());
                }
            }
        }
        if let Some(o) = &self.optimizer {
            for b in &o.buffers {
                for v in b {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header_end = find_header_end(bytes)?;
        let header = std::str::from_utf8(&bytes[..header_end])
            .map_err(|e| parse(e.valid_up_to(), "header is not UTF-8"))?;
        let mut lines = header.lines();
        let mut offset = 0usize;
        match lines.next() {
            Some(MAGIC) => offset += MAGIC.len() + 1,
            _ => return Err(parse(0, format!("missing `{MAGIC}` magic line"))),
        }
        let mut fields: Vec<(&str, &str, usize)> = Vec::new();
        for line in lines {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse(offset, format!("expected key=value, found `{line}`")))?;
            if fields.iter().any(|(fk, _, _)| *fk == k) {
                return Err(parse(offset, format!("duplicate key `{k}`")));
            }
            fields.push((k, v, offset));
            offset += line.len() + 1;
        }
        let get = |k: &str| -> Result<(&str, usize)> {
            fields
                .iter()
                .find(|(fk, _, _)| *fk == k)
                .map(|(_, v, o)| (*v, *o))
                .ok_or_else(|| parse(header_end, format!("missing key `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            let (v, o) = get(k)?;
            v.parse()
                .map_err(|_| parse(o, format!("`{k}` is not an integer: `{v}`")))
        };
        let shape = |k: &str| -> Result<(usize, usize, usize)> {
            let (v, o) = get(k)?;
            let p: Vec<usize> = v
                .split('x')
                .map(|s| s.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse(o, format!("bad shape `{v}`")))?;
            match p[..] {
                [c, h, w] => Ok((c, h, w)),
                _ => Err(parse(o, format!("shape `{v}` needs three dimensions"))),
            }
        };
        for (k, _, o) in &fields {
            const KNOWN: &[&str] = &[
                "kind",
                "input",
                "arch",
                "leak",
                "thresholds",
                "epoch",
                "encoder",
                "normalization",
                "image",
                "block",
                "stride",
                "padding",
                "seed",
                "timesteps",
                "curtail",
                "gen_thresholds",
                "transform_dim",
                "optimizer",
                "optimizer_step",
                "optimizer_buffers",
            ];
            if !KNOWN.contains(k) {
                return Err(parse(*o, format!("unknown key `{k}`")));
            }
        }

        let (kind_s, ko) = get("kind")?;
        let kind = match kind_s {
            "ann" => ModelKind::Ann,
            "snn" => ModelKind::Snn,
            _ => return Err(parse(ko, format!("unknown model kind `{kind_s}`"))),
        };
        let input = shape("input")?;
        let (arch_s, ao) = get("arch")?;
        let arch = Architecture::parse([input.0, input.1, input.2] as Shape, arch_s)
            .map_err(|e| parse(ao, e.to_string()))?;
        let (leak_s, lo) = get("leak")?;
        let leak: f32 = leak_s.parse().map_err(|_| parse(lo, "bad leak"))?;
        let (th_s, to) = get("thresholds")?;
        let thresholds: Vec<f32> = if th_s.is_empty() {
            Vec::new()
        } else {
            th_s.split(',')
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse(to, "bad thresholds"))?
        };
        if kind == ModelKind::Snn && thresholds.len() != arch.lif_layers().len() {
            return Err(parse(
                to,
                format!(
                    "{} thresholds for {} LIF layers",
                    thresholds.len(),
                    arch.lif_layers().len()
                ),
            ));
        }
        let (enc_s, eo) = get("encoder")?;
        let enc_kind: EncoderKind = enc_s
            .parse()
            .map_err(|_| parse(eo, format!("unknown encoder `{enc_s}`")))?;
        let (gt_s, go) = get("gen_thresholds")?;
        let gen_thresholds = if gt_s == "none" {
            None
        } else {
            let (a, b) = gt_s
                .split_once(',')
                .ok_or_else(|| parse(go, "bad gen_thresholds"))?;
            Some((
                a.parse().map_err(|_| parse(go, "bad gen_thresholds"))?,
                b.parse().map_err(|_| parse(go, "bad gen_thresholds"))?,
            ))
        };
        let block_size = num("block")?;
        let tdim = num("transform_dim")?;
        let (_, tdo) = get("transform_dim")?;
        match enc_kind {
            EncoderKind::Poisson if tdim != 0 => {
                return Err(parse(tdo, "Poisson encoder carries no transform"))
            }
            EncoderKind::Transform(_)
                if tdim != block_size && Some(tdim) != block_size.checked_mul(block_size) =>
            {
                return Err(parse(
                    tdo,
                    format!("transform dimension {tdim} incompatible with block size {block_size}"),
                ))
            }
            _ => {}
        }
        let (opt_s, _) = get("optimizer")?;
        let opt_buffers = if opt_s == "none" {
            0
        } else {
            num("optimizer_buffers")?
        };

        // payload size check precedes any allocation sized by the header
        let weights_total: usize = arch
            .weighted_layers()
            .iter()
            .map(|&l| arch.weight_count(l))
            .sum();
        let expect = weights_total
            .checked_mul(4)
            .and_then(|w| tdim.checked_mul(tdim)?.checked_mul(8)?.checked_add(w))
            .and_then(|s| {
                weights_total
                    .checked_mul(4)?
                    .checked_mul(opt_buffers)?
                    .checked_add(s)
            })
            .ok_or_else(|| parse(header_end, "payload size overflows"))?;
        let payload = &bytes[header_end + 4..];
        if payload.len() != expect {
            return Err(parse(
                header_end + 4 + payload.len().min(expect),
                format!(
                    "payload is {} bytes, header implies {expect}",
                    payload.len()
                ),
            ));
        }
        let mut cursor = 0usize;
        let take_f32 = |n: usize, cursor: &mut usize| -> Vec<f32> {
            let v = payload[*cursor..*cursor + 4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            *cursor += 4 * n;
            v
        };
        let mut network = Network::zeros(arch);
        for l in network.arch.weighted_layers() {
            let n = network.arch.weight_count(l);
            network.weights[l] = take_f32(n, &mut cursor);
        }
        let transform = if tdim > 0 {
            let vals: Vec<f64> = payload[cursor..cursor + 8 * tdim * tdim]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            cursor += 8 * tdim * tdim;
            Some(DMatrix::from_row_slice(tdim, tdim, &vals))
        } else {
            None
        };
        let optimizer = if opt_s == "none" {
            None
        } else {
            let (step_s, so) = get("optimizer_step")?;
            let step = step_s
                .parse()
                .map_err(|_| parse(so, "bad optimizer_step"))?;
            let buffers = (0..opt_buffers)
                .map(|_| take_f32(weights_total, &mut cursor))
                .collect();
            Some(OptimizerState {
                name: opt_s.to_string(),
                step,
                buffers,
            })
        };
        let (seed_s, so) = get("seed")?;
        let (norm_s, no) = get("normalization")?;
        let encoder = EncoderMeta {
            kind: enc_kind,
            normalization: norm_s
                .parse()
                .map_err(|_| parse(no, format!("unknown normalization `{norm_s}`")))?,
            image_shape: shape("image")?,
            block_size,
            stride: num("stride")?,
            padding: num("padding")?,
            seed: seed_s.parse().map_err(|_| parse(so, "bad seed"))?,
            timesteps: num("timesteps")?,
            curtail: num("curtail")?,
            gen_thresholds,
            transform,
        };
        if let (EncoderKind::Transform(k), Some(m)) = (enc_kind, &encoder.transform) {
            if k != TransformKind::Dct && m.nrows() != block_size * block_size {
                return Err(parse(tdo, "only the DCT uses a separable transform matrix"));
            }
        }
        Ok(Checkpoint {
            kind,
            network,
            thresholds,
            leak,
            encoder,
            epoch: num("epoch")?,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

// Returns the offset of the `end` line; the payload starts 4 bytes later.
fn find_header_end(bytes: &[u8]) -> Result<usize> {
    let limit = bytes.len().min(MAX_HEADER);
    let mut line_start = 0;
    for i in 0..limit {
        if bytes[i] == b'\n' {
            if &bytes[line_start..i] == b"end" {
                return Ok(line_start);
            }
            line_start = i + 1;
        }
    }
    Err(parse(limit, "header not terminated by an `end` line"))
}
