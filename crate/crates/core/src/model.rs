//! Shared clip encoder plus the absolute and relative score heads.
//!
//! The encoder embeds every frame (optionally concatenated with its temporal
//! difference inside the clip) through a two-layer MLP and averages the
//! embeddings of each clip, giving one `d`-wide row per clip. Both heads pool
//! over clips and run a three-layer MLP of widths `d / (d/2) / 1`. Head outputs
//! are mapped onto the score scale by a fixed affine: absolute scores as
//! `center + scale·out`, relative scores as `scale·out`.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{AdamState, Graph, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    /// Feature width.
    pub d: usize,
    pub hidden: usize,
    pub use_temporal_diff: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d: 256,
            hidden: 256,
            use_temporal_diff: true,
        }
    }
}

impl EncoderConfig {
    pub fn desk() -> Self {
        Self {
            d: 32,
            hidden: 64,
            use_temporal_diff: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.hidden == 0 {
            return Err(Error::Config(format!(
                "encoder widths must be >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Frames per clip; the encoder averages over blocks of this many frames.
    pub clip_len: usize,
    pub score_center: f64,
    pub score_scale: f64,
}

impl ModelConfig {
    pub fn new(
        encoder: EncoderConfig,
        channels: usize,
        height: usize,
        width: usize,
        clip_len: usize,
    ) -> Self {
        Self {
            encoder,
            channels,
            height,
            width,
            clip_len,
            score_center: 18.0,
            score_scale: 12.0,
        }
    }

    pub fn frame_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn input_width(&self) -> usize {
        self.frame_len() * if self.encoder.use_temporal_diff { 2 } else { 1 }
    }

    pub fn head_hidden(&self) -> usize {
        (self.encoder.d / 2).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.clip_len == 0 || self.frame_len() == 0 {
            return Err(Error::Config(
                "model needs a positive clip length and frame size".into(),
            ));
        }
        if self.score_scale.is_nan() || self.score_scale <= 0.0 || !self.score_center.is_finite() {
            return Err(Error::Config(
                "score scale must be > 0 and centre finite".into(),
            ));
        }
        Ok(())
    }

    /// Parameter names and shapes in storage order.
    pub fn layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (inp, hid, d, h2) = (
            self.input_width(),
            self.encoder.hidden,
            self.encoder.d,
            self.head_hidden(),
        );
        vec![
            ("enc.w1", vec![inp, hid]),
            ("enc.b1", vec![hid]),
            ("enc.w2", vec![hid, d]),
            ("enc.b2", vec![d]),
            ("abs.w1", vec![d, d]),
            ("abs.b1", vec![d]),
            ("abs.w2", vec![d, h2]),
            ("abs.b2", vec![h2]),
            ("abs.w3", vec![h2, 1]),
            ("abs.b3", vec![1]),
            ("rel.w1", vec![2 * d, d]),
            ("rel.b1", vec![d]),
            ("rel.w2", vec![d, h2]),
            ("rel.b2", vec![h2]),
            ("rel.w3", vec![h2, 1]),
            ("rel.b3", vec![1]),
        ]
    }
}

const ENC: usize = 0;
const ABS: usize = 4;
const REL: usize = 10;
const ENCODER_PARAMS: usize = 4;

/// Which optimizer group a parameter belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamGroup {
    Encoder,
    Heads,
}

pub struct Model {
    pub config: ModelConfig,
    params: Vec<Tensor>,
    abs_head_calls: AtomicUsize,
}

impl Clone for Model {
    fn clone(&self) -> Self {
        Self {
            config: self.config,
            params: self.params.clone(),
            abs_head_calls: AtomicUsize::new(0),
        }
    }
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("config", &self.config)
            .field("params", &self.params.len())
            .finish()
    }
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

/// Xavier-uniform weights, zero biases.
pub fn init_params(config: ModelConfig, seed: u64) -> Result<Model> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = config
        .layout()
        .into_iter()
        .map(|(_, shape)| match shape.as_slice() {
            &[fan_in, fan_out] => {
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-a..a))
                    .collect();
                Tensor::new(shape, data).expect("layout shape")
            }
            _ => Tensor::zeros(&shape),
        })
        .collect();
    Ok(Model {
        config,
        params,
        abs_head_calls: AtomicUsize::new(0),
    })
}

impl Model {
    pub fn from_params(config: ModelConfig, params: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        if layout.len() != params.len() {
            return Err(Error::dim(
                "model",
                format!("expected {} tensors, got {}", layout.len(), params.len()),
            ));
        }
        for ((name, shape), p) in layout.iter().zip(&params) {
            if p.shape() != shape.as_slice() {
                return Err(Error::dim(
                    "model",
                    format!("{name}: expected {shape:?}, got {:?}", p.shape()),
                ));
            }
        }
        Ok(Self {
            config,
            params,
            abs_head_calls: AtomicUsize::new(0),
        })
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn named_params(&self) -> impl Iterator<Item = (&'static str, &Tensor)> {
        self.config
            .layout()
            .into_iter()
            .map(|(n, _)| n)
            .zip(self.params.iter())
    }

    pub fn group_of(index: usize) -> ParamGroup {
        if index < ENCODER_PARAMS {
            ParamGroup::Encoder
        } else {
            ParamGroup::Heads
        }
    }

    /// Split mutable access into (encoder, heads) parameter groups.
    pub fn groups_mut(&mut self) -> (&mut [Tensor], &mut [Tensor]) {
        self.params.split_at_mut(ENCODER_PARAMS)
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    /// Number of absolute-head evaluations since construction.
    pub fn abs_head_calls(&self) -> usize {
        self.abs_head_calls.load(Ordering::Relaxed)
    }

    /// Places every parameter on `g` as a trainable leaf.
    pub fn bind(&self, g: &mut Graph) -> Bound {
        Bound {
            vars: self.params.iter().map(|p| g.param(p.clone())).collect(),
        }
    }

    /// Places every parameter on `g` as a constant (inference only).
    pub fn bind_frozen(&self, g: &mut Graph) -> Bound {
        Bound {
            vars: self.params.iter().map(|p| g.constant(p.clone())).collect(),
        }
    }

    /// Encoder input rows for a clip tensor `[(K·l)×c×h×w]`: each frame,
    /// followed by its difference from the previous frame of the same clip
    /// (zero for the first frame) when temporal differences are enabled.
    pub fn encoder_input(&self, clips: &Tensor) -> Result<Tensor> {
        let cfg = &self.config;
        let fl = cfg.frame_len();
        let shape = clips.shape();
        if shape.len() != 4 || shape[1] * shape[2] * shape[3] != fl || shape[1] != cfg.channels {
            return Err(Error::dim(
                "encode",
                format!(
                    "clips {shape:?} do not match frames of {}×{}×{}",
                    cfg.channels, cfg.height, cfg.width
                ),
            ));
        }
        let n = shape[0];
        if !n.is_multiple_of(cfg.clip_len) {
            return Err(Error::dim(
                "encode",
                format!(
                    "{n} frames are not a whole number of clips of {}",
                    cfg.clip_len
                ),
            ));
        }
        let src = clips.data();
        if !cfg.encoder.use_temporal_diff {
            return Tensor::new(vec![n, fl], src.to_vec());
        }
        let mut out = Vec::with_capacity(n * 2 * fl);
        for t in 0..n {
            let cur = &src[t * fl..(t + 1) * fl];
            out.extend_from_slice(cur);
            if t % cfg.clip_len == 0 {
                out.extend(std::iter::repeat_n(0.0, fl));
            } else {
                let prev = &src[(t - 1) * fl..t * fl];
                out.extend(cur.iter().zip(prev).map(|(a, b)| a - b));
            }
        }
        Tensor::new(vec![n, 2 * fl], out)
    }
}

/// Parameters of a [`Model`] placed on a graph.
#[derive(Clone, Debug)]
pub struct Bound {
    pub vars: Vec<Var>,
}

impl Bound {
    fn mlp3(&self, g: &mut Graph, x: Var, base: usize) -> Result<Var> {
        let v = &self.vars;
        let h = g.matmul(x, v[base])?;
        let h = g.add_row(h, v[base + 1])?;
        let h = g.silu(h);
        let h = g.matmul(h, v[base + 2])?;
        let h = g.add_row(h, v[base + 3])?;
        let h = g.silu(h);
        let o = g.matmul(h, v[base + 4])?;
        g.add_row(o, v[base + 5])
    }

    /// Per-clip features `[(rows/l)×d]` from prepared encoder input rows.
    pub fn encode_rows(&self, g: &mut Graph, model: &Model, input: Tensor) -> Result<Var> {
        let (_, width) = input.dims2("encode")?;
        if width != model.config.input_width() {
            return Err(Error::dim(
                "encode",
                format!(
                    "input width {width}, model expects {}",
                    model.config.input_width()
                ),
            ));
        }
        let x = g.constant(input);
        let v = &self.vars;
        let h = g.matmul(x, v[ENC])?;
        let h = g.add_row(h, v[ENC + 1])?;
        let h = g.silu(h);
        let e = g.matmul(h, v[ENC + 2])?;
        let e = g.add_row(e, v[ENC + 3])?;
        g.group_mean_rows(e, model.config.clip_len)
    }

    /// `F`: clips `[(K·l)×c×h×w]` → features `[K×d]`.
    pub fn encode(&self, g: &mut Graph, model: &Model, clips: &Tensor) -> Result<Var> {
        let input = model.encoder_input(clips)?;
        self.encode_rows(g, model, input)
    }

    fn check_width(g: &Graph, model: &Model, feats: Var, op: &'static str) -> Result<()> {
        let d = model.config.encoder.d;
        match g.value(feats).shape() {
            &[_, w] if w == d => Ok(()),
            s => Err(Error::dim(
                op,
                format!("features {s:?}, expected width {d}"),
            )),
        }
    }

    /// Absolute score from one video's `[K×d]` features.
    pub fn predict_abs(&self, g: &mut Graph, model: &Model, feats: Var) -> Result<Var> {
        Self::check_width(g, model, feats, "predict_abs")?;
        model.abs_head_calls.fetch_add(1, Ordering::Relaxed);
        let d = model.config.encoder.d;
        let pooled = g.gap_temporal(feats)?;
        let row = g.reshape(pooled, &[1, d])?;
        let out = self.mlp3(g, row, ABS)?;
        let out = g.reshape(out, &[])?;
        Ok(g.affine(out, model.config.score_scale, model.config.score_center))
    }

    /// Relative score `ŷᵢ − ŷⱼ` from two videos' features.
    pub fn predict_rel(
        &self,
        g: &mut Graph,
        model: &Model,
        feats_i: Var,
        feats_j: Var,
    ) -> Result<Var> {
        Self::check_width(g, model, feats_i, "predict_rel")?;
        Self::check_width(g, model, feats_j, "predict_rel")?;
        let d = model.config.encoder.d;
        let pi = g.gap_temporal(feats_i)?;
        let pj = g.gap_temporal(feats_j)?;
        let cat = g.concat_vec(pi, pj)?;
        let row = g.reshape(cat, &[1, 2 * d])?;
        let out = self.mlp3(g, row, REL)?;
        let out = g.reshape(out, &[])?;
        Ok(g.scale(out, model.config.score_scale))
    }

    /// Batched pooling: `[(B·K)×d]` clip features → `[B×d]` video features.
    pub fn pool(&self, g: &mut Graph, clip_feats: Var, clips_per_video: usize) -> Result<Var> {
        g.group_mean_rows(clip_feats, clips_per_video)
    }

    /// Batched absolute head over pooled `[B×d]` features → `[B]`.
    pub fn abs_head(&self, g: &mut Graph, model: &Model, pooled: Var) -> Result<Var> {
        Self::check_width(g, model, pooled, "abs_head")?;
        model.abs_head_calls.fetch_add(1, Ordering::Relaxed);
        let b = g.value(pooled).shape()[0];
        let out = self.mlp3(g, pooled, ABS)?;
        let out = g.reshape(out, &[b])?;
        Ok(g.affine(out, model.config.score_scale, model.config.score_center))
    }

    /// Batched relative head over pooled `[B×d]` pairs → `[B]`.
    pub fn rel_head(
        &self,
        g: &mut Graph,
        model: &Model,
        pooled_i: Var,
        pooled_j: Var,
    ) -> Result<Var> {
        Self::check_width(g, model, pooled_i, "rel_head")?;
        Self::check_width(g, model, pooled_j, "rel_head")?;
        let b = g.value(pooled_i).shape()[0];
        let cat = g.concat_cols(pooled_i, pooled_j)?;
        let out = self.mlp3(g, cat, REL)?;
        let out = g.reshape(out, &[b])?;
        Ok(g.scale(out, model.config.score_scale))
    }

    /// Gradients of every parameter after backward, in layout order.
    pub fn grads(&self, g: &Graph) -> Vec<Tensor> {
        self.vars
            .iter()
            .map(|&v| g.grad(v).expect("bound params require grad"))
            .collect()
    }
}

/// Absolute score from a relative score and its anchor: `Δ + anchor`.
pub fn reconstruct(delta: f64, anchor: f64) -> f64 {
    delta + anchor
}

// ---- checkpoints ---------------------------------------------------------

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CRDACKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Adam state for the two learning-rate groups.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub encoder: AdamState,
    pub heads: AdamState,
}

impl OptimizerState {
    pub fn new(model: &Model) -> Self {
        let (enc, heads) = model.params.split_at(ENCODER_PARAMS);
        Self {
            encoder: AdamState::new(enc),
            heads: AdamState::new(heads),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: Option<OptimizerState>,
    /// Number of completed epochs.
    pub epoch: usize,
    /// Free-form run metadata (training config echo).
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the payload, in f64 elements.
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    config: ModelConfig,
    epoch: usize,
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
    encoder_adam: Option<AdamState>,
    heads_adam: Option<AdamState>,
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    let mut payload: Vec<f64> = Vec::new();
    let mut tensors = Vec::new();
    let mut put = |name: String, t: &Tensor, payload: &mut Vec<f64>| {
        tensors.push(TensorEntry {
            name,
            shape: t.shape().to_vec(),
            offset: payload.len(),
        });
        payload.extend_from_slice(t.data());
    };
    for (name, t) in ck.model.named_params() {
        put(name.to_string(), t, &mut payload);
    }
    if let Some(opt) = &ck.optimizer {
        for (group, st) in [("encoder", &opt.encoder), ("heads", &opt.heads)] {
            for (i, m) in st.first_moment.iter().enumerate() {
                put(format!("adam.{group}.m.{i}"), m, &mut payload);
            }
            for (i, v) in st.second_moment.iter().enumerate() {
                put(format!("adam.{group}.v.{i}"), v, &mut payload);
            }
        }
    }
    let header = CheckpointHeader {
        config: ck.model.config,
        epoch: ck.epoch,
        meta: ck.meta.clone(),
        tensors,
        encoder_adam: ck.optimizer.as_ref().map(|o| o.encoder.clone()),
        heads_adam: ck.optimizer.as_ref().map(|o| o.heads.clone()),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");

    let mut buf = Vec::with_capacity(24 + header.len() + payload.len() * 8);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    for v in &payload {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    // write-then-rename so a crash never leaves a half-written checkpoint
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint; when `expected` is given, its model config must match.
pub fn load_checkpoint(path: &Path, expected: Option<&ModelConfig>) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::format(path, "not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            path: path.into(),
            found: version.to_string(),
            expected: CHECKPOINT_VERSION.to_string(),
        });
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let body = bytes
        .get(20..20 + hlen)
        .ok_or_else(|| Error::format(path, "truncated header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(body).map_err(|e| Error::format(path, e.to_string()))?;
    let raw = &bytes[20 + hlen..];
    if raw.len() % 8 != 0 {
        return Err(Error::format(
            path,
            "payload is not a whole number of f64 values",
        ));
    }
    let payload: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    if let Some(want) = expected {
        if *want != header.config {
            return Err(Error::ConfigConflict(format!(
                "checkpoint {} was written for {:?}, run expects {:?}",
                path.display(),
                header.config,
                want
            )));
        }
    }

    let take = |e: &TensorEntry| -> Result<Tensor> {
        let n: usize = e.shape.iter().product();
        let data = payload
            .get(e.offset..e.offset + n)
            .ok_or_else(|| Error::format(path, format!("tensor {} truncated", e.name)))?;
        Tensor::new(e.shape.clone(), data.to_vec())
    };
    let layout = header.config.layout();
    if header.tensors.len() < layout.len() {
        return Err(Error::format(path, "missing parameter tensors"));
    }
    let mut params = Vec::with_capacity(layout.len());
    for ((name, _), e) in layout.iter().zip(&header.tensors) {
        if e.name != *name {
            return Err(Error::format(
                path,
                format!("expected tensor {name}, found {}", e.name),
            ));
        }
        params.push(take(e)?);
    }
    let model = Model::from_params(header.config, params)?;

    let mut rest = header.tensors[layout.len()..].iter();
    let mut restore = |st: Option<AdamState>, count: usize| -> Result<Option<AdamState>> {
        let Some(mut st) = st else { return Ok(None) };
        st.first_moment = (0..count)
            .map(|_| {
                rest.next()
                    .ok_or_else(|| Error::format(path, "missing moment"))
                    .and_then(&take)
            })
            .collect::<Result<_>>()?;
        st.second_moment = (0..count)
            .map(|_| {
                rest.next()
                    .ok_or_else(|| Error::format(path, "missing moment"))
                    .and_then(&take)
            })
            .collect::<Result<_>>()?;
        Ok(Some(st))
    };
    let enc = restore(header.encoder_adam, ENCODER_PARAMS)?;
    let heads = restore(header.heads_adam, layout.len() - ENCODER_PARAMS)?;
    let optimizer = match (enc, heads) {
        (Some(encoder), Some(heads)) => Some(OptimizerState { encoder, heads }),
        (None, None) => None,
        _ => {
            return Err(Error::format(
                path,
                "optimizer state present for only one group",
            ))
        }
    };
    Ok(Checkpoint {
        model,
        optimizer,
        epoch: header.epoch,
        meta: header.meta,
    })
}
