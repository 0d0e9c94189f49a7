//! Triplet sampling and the optimization loops.
//!
//! Every step draws `B` (source, exemplar, target) triplets, builds the loss
//! graph afresh, backpropagates and applies Adam with separate learning rates
//! for the encoder and for the two heads. Random streams are derived from
//! `(seed, epoch)`, so a run resumed from an epoch checkpoint continues exactly
//! as the uninterrupted run would.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{
    loss_cons_source, loss_cons_target, loss_sup_abs, loss_sup_rel, total_loss, LossTerms,
    LossWeights, StepLosses,
};
use crate::model::{
    init_params, save_checkpoint, Bound, Checkpoint, Model, ModelConfig, OptimizerState,
};
use crate::numkernel::{adam_step, Graph, Tensor, Var};
use crate::sampling::{train_clip_sample, ClipSpec};
use crate::synthdata::{UnlabeledRef, Video, VideoSample};

/// Switches that delete individual objective terms or change their form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ablation {
    pub disable_sup_rel: bool,
    pub disable_sup_abs: bool,
    pub disable_cons_s: bool,
    pub disable_cons_t: bool,
    /// Let the target pseudo-label branch receive gradients.
    pub disable_stopgrad: bool,
    /// Additionally supervise the source absolute prediction (weight alpha).
    pub also_supervise_source_abs: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_encoder: f64,
    pub lr_heads: f64,
    pub weights: LossWeights,
    pub clip: ClipSpec,
    pub seed: u64,
    #[serde(default)]
    pub ablation: Ablation,
    /// Number of labeled target videos in the semi-supervised variant.
    pub target_shots: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch_size: 16,
            lr_encoder: 1e-5,
            lr_heads: 5e-5,
            weights: LossWeights::default(),
            clip: ClipSpec::default(),
            seed: 0,
            ablation: Ablation::default(),
            target_shots: 10,
        }
    }
}

impl TrainConfig {
    /// Sizes and rates that train in well under a minute on one CPU core.
    pub fn desk() -> Self {
        Self {
            epochs: 60,
            batch_size: 8,
            lr_encoder: 1e-3,
            lr_heads: 1e-3,
            clip: ClipSpec::desk(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch_size must be >= 2, got {}",
                self.batch_size
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.lr_encoder >= 0.0 && self.lr_heads >= 0.0) {
            return Err(Error::Config("learning rates must be >= 0".into()));
        }
        self.clip.validate()?;
        self.weights
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    fn target_branch_active(&self) -> bool {
        !self.ablation.disable_cons_t && self.weights.gamma != 0.0
    }
}

/// One optimization step's worth of triplets.
#[derive(Clone, Debug)]
pub struct TripletBatch {
    /// `[B, K·l, c, h, w]`
    pub source: Tensor,
    pub exemplar: Tensor,
    pub target: Tensor,
    pub y_source: Vec<f64>,
    pub y_exemplar: Vec<f64>,
    pub source_ids: Vec<String>,
    pub exemplar_ids: Vec<String>,
    pub target_ids: Vec<String>,
}

impl TripletBatch {
    pub fn len(&self) -> usize {
        self.y_source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_source.is_empty()
    }
}

fn stack(clips: Vec<Tensor>) -> Tensor {
    let mut shape = vec![clips.len()];
    shape.extend_from_slice(clips[0].shape());
    let data = clips.into_iter().flat_map(Tensor::into_data).collect();
    Tensor::new(shape, data).expect("clips share a shape")
}

/// `[B, F, c, h, w]` → `[B·F, c, h, w]`
fn flatten_batch(t: &Tensor) -> Tensor {
    let s = t.shape();
    t.clone()
        .reshape(&[s[0] * s[1], s[2], s[3], s[4]])
        .expect("rank-5 batch")
}

fn label_of(s: &VideoSample) -> Result<f64> {
    s.label
        .ok_or_else(|| Error::contract(format!("source sample {} has no label", s.id)))
}

/// Draws `b` triplets: a distinct (source, exemplar) pair uniformly without
/// replacement from the labeled set and a uniform target.
pub fn sample_triplets<R: Rng + ?Sized>(
    source: &[VideoSample],
    target: &[UnlabeledRef<'_>],
    b: usize,
    spec: ClipSpec,
    rng: &mut R,
) -> Result<TripletBatch> {
    if source.len() < 2 {
        return Err(Error::contract(format!(
            "need at least 2 labeled source videos, got {}",
            source.len()
        )));
    }
    if target.is_empty() {
        return Err(Error::contract("need at least 1 target video"));
    }
    let (mut s, mut e, mut t) = (
        Vec::with_capacity(b),
        Vec::with_capacity(b),
        Vec::with_capacity(b),
    );
    let mut batch = TripletBatch {
        source: Tensor::scalar(0.0),
        exemplar: Tensor::scalar(0.0),
        target: Tensor::scalar(0.0),
        y_source: Vec::with_capacity(b),
        y_exemplar: Vec::with_capacity(b),
        source_ids: Vec::with_capacity(b),
        exemplar_ids: Vec::with_capacity(b),
        target_ids: Vec::with_capacity(b),
    };
    for _ in 0..b {
        let i = rng.gen_range(0..source.len());
        let mut j = rng.gen_range(0..source.len() - 1);
        if j >= i {
            j += 1;
        }
        let k = rng.gen_range(0..target.len());
        let (src, ex, tg) = (&source[i], &source[j], &target[k]);
        batch.y_source.push(label_of(src)?);
        batch.y_exemplar.push(label_of(ex)?);
        s.push(train_clip_sample(&src.video, spec, rng)?);
        e.push(train_clip_sample(&ex.video, spec, rng)?);
        t.push(train_clip_sample(tg.video, spec, rng)?);
        batch.source_ids.push(src.id.clone());
        batch.exemplar_ids.push(ex.id.clone());
        batch.target_ids.push(tg.id.to_string());
    }
    batch.source = stack(s);
    batch.exemplar = stack(e);
    batch.target = stack(t);
    Ok(batch)
}

/// Labeled clips outside the triplet (source-only batches, labeled target shots).
#[derive(Clone, Debug)]
pub struct LabeledBatch {
    pub clips: Tensor,
    pub labels: Vec<f64>,
}

fn sample_labeled<R: Rng + ?Sized>(
    pool: &[(&Video, f64)],
    b: usize,
    spec: ClipSpec,
    rng: &mut R,
) -> Result<LabeledBatch> {
    let mut clips = Vec::with_capacity(b);
    let mut labels = Vec::with_capacity(b);
    for _ in 0..b {
        let (v, y) = pool[rng.gen_range(0..pool.len())];
        clips.push(train_clip_sample(v, spec, rng)?);
        labels.push(y);
    }
    Ok(LabeledBatch {
        clips: stack(clips),
        labels,
    })
}

/// A fully built loss graph for one step.
pub struct StepGraph {
    pub graph: Graph,
    pub bound: Bound,
    pub terms: LossTerms,
    pub total: Var,
    /// Target videos pushed through the encoder while building this graph.
    pub target_forwards: usize,
}

impl StepGraph {
    pub fn losses(&self) -> StepLosses {
        self.terms.values(&self.graph, self.total)
    }
}

fn encode_pooled(
    g: &mut Graph,
    bound: &Bound,
    model: &Model,
    batch: &Tensor,
    segments: usize,
) -> Result<Var> {
    let input = model.encoder_input(&flatten_batch(batch))?;
    let clip_feats = bound.encode_rows(g, model, input)?;
    bound.pool(g, clip_feats, segments)
}

/// Builds the full objective for one triplet batch, honoring the ablation
/// switches. `labeled_target` adds the semi-supervised term.
pub fn build_step_graph(
    model: &Model,
    batch: &TripletBatch,
    labeled_target: Option<&LabeledBatch>,
    cfg: &TrainConfig,
) -> Result<StepGraph> {
    build_step_graph_on(Graph::new(), model, batch, labeled_target, cfg)
}

/// [`build_step_graph`] on a caller-supplied (normally empty) tape.
pub fn build_step_graph_on(
    mut g: Graph,
    model: &Model,
    batch: &TripletBatch,
    labeled_target: Option<&LabeledBatch>,
    cfg: &TrainConfig,
) -> Result<StepGraph> {
    let ab = cfg.ablation;
    let k = cfg.clip.segments;
    let bound = model.bind(&mut g);
    let mut terms = LossTerms::default();

    let ps = encode_pooled(&mut g, &bound, model, &batch.source, k)?;
    let pe = encode_pooled(&mut g, &bound, model, &batch.exemplar, k)?;
    let abs_e = bound.abs_head(&mut g, model, pe)?;
    let need_abs_s = !ab.disable_cons_s || ab.also_supervise_source_abs;
    let abs_s = if need_abs_s {
        Some(bound.abs_head(&mut g, model, ps)?)
    } else {
        None
    };
    let need_rel_se = !ab.disable_sup_rel || !ab.disable_cons_s;
    let rel_se = if need_rel_se {
        Some(bound.rel_head(&mut g, model, ps, pe)?)
    } else {
        None
    };

    if !ab.disable_sup_rel {
        terms.sup_rel = Some(loss_sup_rel(
            &mut g,
            rel_se.unwrap(),
            &batch.y_source,
            &batch.y_exemplar,
        )?);
    }
    if !ab.disable_sup_abs {
        terms.sup_abs = Some(loss_sup_abs(&mut g, abs_e, &batch.y_exemplar)?);
    }
    if !ab.disable_cons_s {
        let recon_s = g.add(rel_se.unwrap(), abs_e)?;
        terms.cons_s = Some(loss_cons_source(&mut g, recon_s, abs_s.unwrap())?);
    }

    let mut extra = Vec::new();
    if ab.also_supervise_source_abs {
        extra.push(loss_sup_abs(&mut g, abs_s.unwrap(), &batch.y_source)?);
    }

    let mut target_forwards = 0;
    if cfg.target_branch_active() {
        let pt = encode_pooled(&mut g, &bound, model, &batch.target, k)?;
        target_forwards += batch.len();
        let abs_t = bound.abs_head(&mut g, model, pt)?;
        let rel_te = bound.rel_head(&mut g, model, pt, pe)?;
        let recon_t = g.add(rel_te, abs_e)?;
        terms.cons_t = Some(loss_cons_target(
            &mut g,
            recon_t,
            abs_t,
            !ab.disable_stopgrad,
        )?);
    }

    if let Some(lt) = labeled_target {
        let pl = encode_pooled(&mut g, &bound, model, &lt.clips, k)?;
        target_forwards += lt.labels.len();
        let abs_l = bound.abs_head(&mut g, model, pl)?;
        extra.push(loss_sup_abs(&mut g, abs_l, &lt.labels)?);
    }
    terms.sup_extra = match extra.as_slice() {
        [] => None,
        [one] => Some(*one),
        many => {
            let w: Vec<(f64, Var)> = many.iter().map(|&v| (1.0, v)).collect();
            Some(g.weighted_sum(&w)?)
        }
    };

    let total = total_loss(&mut g, &terms, &cfg.weights)?;
    Ok(StepGraph {
        graph: g,
        bound,
        terms,
        total,
        target_forwards,
    })
}

/// Source-only objective: absolute-head MSE on labeled source clips.
pub fn build_source_only_graph(
    model: &Model,
    batch: &LabeledBatch,
    cfg: &TrainConfig,
) -> Result<StepGraph> {
    let mut g = Graph::new();
    let bound = model.bind(&mut g);
    let p = encode_pooled(&mut g, &bound, model, &batch.clips, cfg.clip.segments)?;
    let abs = bound.abs_head(&mut g, model, p)?;
    let sup = loss_sup_abs(&mut g, abs, &batch.labels)?;
    let terms = LossTerms {
        sup_abs: Some(sup),
        ..LossTerms::default()
    };
    let total = g.weighted_sum(&[(1.0, sup)])?;
    Ok(StepGraph {
        graph: g,
        bound,
        terms,
        total,
        target_forwards: 0,
    })
}

/// Backward plus one Adam update with the encoder / heads learning rates.
pub fn apply_step(
    model: &mut Model,
    opt: &mut OptimizerState,
    step: &mut StepGraph,
    cfg: &TrainConfig,
) -> Result<()> {
    step.graph.backward(step.total)?;
    let grads = step.bound.grads(&step.graph);
    let (enc_grads, head_grads) = grads.split_at(opt.encoder.first_moment.len());
    let (enc, heads) = model.groups_mut();
    adam_step(enc, enc_grads, &mut opt.encoder, cfg.lr_encoder)?;
    adam_step(heads, head_grads, &mut opt.heads, cfg.lr_heads)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub mean: StepLosses,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub mode: String,
    pub seed: u64,
    pub config: Option<TrainConfig>,
    pub epochs: Vec<EpochRecord>,
    /// Target videos encoded during training.
    pub target_forward_passes: usize,
    /// Target videos drawn by the sampler.
    pub target_samples_consumed: usize,
    /// Every step's losses, kept only when requested.
    #[serde(skip)]
    pub steps: Vec<StepLosses>,
}

impl TrainLog {
    /// One JSON object per line: a header, then one record per epoch.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let header = serde_json::json!({
            "mode": self.mode,
            "seed": self.seed,
            "config": self.config,
            "target_forward_passes": self.target_forward_passes,
            "target_samples_consumed": self.target_samples_consumed,
        });
        let mut text = header.to_string();
        text.push('\n');
        for r in &self.epochs {
            text.push_str(&serde_json::to_string(r).expect("record serializes"));
            text.push('\n');
        }
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    Coreda,
    SourceOnly,
    SemiSup,
}

impl TrainMode {
    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Coreda => "coreda",
            TrainMode::SourceOnly => "source-only",
            TrainMode::SemiSup => "semi-sup",
        }
    }
}

/// Runs training; owns output locations and optional resume state.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub cfg: TrainConfig,
    pub model_config: ModelConfig,
    /// Written after every epoch when set.
    pub checkpoint_path: Option<PathBuf>,
    /// Keep every step's losses in the returned log.
    pub record_steps: bool,
}

fn epoch_rng(seed: u64, stream: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream + epoch as u64);
    rng
}

const TRIPLET_STREAM: u64 = 1 << 20;
const SHOT_STREAM: u64 = 2 << 20;
const SOURCE_ONLY_STREAM: u64 = 3 << 20;

impl Trainer {
    pub fn new(cfg: TrainConfig, model_config: ModelConfig) -> Self {
        Self {
            cfg,
            model_config,
            checkpoint_path: None,
            record_steps: false,
        }
    }

    fn start(&self, resume: Option<Checkpoint>) -> Result<(Model, OptimizerState, usize)> {
        self.cfg.validate()?;
        if self.model_config.clip_len != self.cfg.clip.clip_len {
            return Err(Error::ConfigConflict(format!(
                "model clip length {} differs from training clip length {}",
                self.model_config.clip_len, self.cfg.clip.clip_len
            )));
        }
        match resume {
            None => {
                let model = init_params(self.model_config, self.cfg.seed)?;
                let opt = OptimizerState::new(&model);
                Ok((model, opt, 0))
            }
            Some(ck) => {
                if ck.model.config != self.model_config {
                    return Err(Error::ConfigConflict(
                        "checkpoint model config differs from run config".into(),
                    ));
                }
                let opt = ck
                    .optimizer
                    .ok_or_else(|| Error::State("checkpoint has no optimizer state".into()))?;
                Ok((ck.model, opt, ck.epoch))
            }
        }
    }

    fn checkpoint(
        &self,
        model: &Model,
        opt: &OptimizerState,
        epoch: usize,
        mode: TrainMode,
    ) -> Result<()> {
        if let Some(path) = &self.checkpoint_path {
            let ck = Checkpoint {
                model: model.clone(),
                optimizer: Some(opt.clone()),
                epoch,
                meta: serde_json::json!({ "mode": mode.name(), "train": self.cfg }),
            };
            save_checkpoint(&ck, path)?;
        }
        Ok(())
    }

    pub fn train_coreda(
        &self,
        source: &[VideoSample],
        target: &[UnlabeledRef<'_>],
    ) -> Result<(Model, TrainLog)> {
        self.run_adaptation(source, target, &[], None, TrainMode::Coreda)
    }

    pub fn resume_coreda(
        &self,
        ck: Checkpoint,
        source: &[VideoSample],
        target: &[UnlabeledRef<'_>],
    ) -> Result<(Model, TrainLog)> {
        self.run_adaptation(source, target, &[], Some(ck), TrainMode::Coreda)
    }

    /// CoRe-DA plus an absolute-head MSE on a handful of labeled target videos.
    pub fn train_semisupervised(
        &self,
        source: &[VideoSample],
        target: &[UnlabeledRef<'_>],
        labeled_target: &BTreeMap<String, f64>,
    ) -> Result<(Model, TrainLog)> {
        if labeled_target.len() != self.cfg.target_shots {
            return Err(Error::contract(format!(
                "expected exactly {} labeled target ids, got {}",
                self.cfg.target_shots,
                labeled_target.len()
            )));
        }
        let mut pool = Vec::with_capacity(labeled_target.len());
        for (id, &y) in labeled_target {
            let t = target.iter().find(|t| t.id == id).ok_or_else(|| {
                Error::contract(format!("labeled id {id} is not in the target set"))
            })?;
            pool.push((t.video, y));
        }
        self.run_adaptation(source, target, &pool, None, TrainMode::SemiSup)
    }

    fn run_adaptation(
        &self,
        source: &[VideoSample],
        target: &[UnlabeledRef<'_>],
        shots: &[(&Video, f64)],
        resume: Option<Checkpoint>,
        mode: TrainMode,
    ) -> Result<(Model, TrainLog)> {
        let cfg = &self.cfg;
        let (mut model, mut opt, first_epoch) = self.start(resume)?;
        let b = cfg.batch_size;
        let steps = source.len().max(target.len()).div_ceil(b);
        let mut log = TrainLog {
            mode: mode.name().into(),
            seed: cfg.seed,
            config: Some(cfg.clone()),
            ..TrainLog::default()
        };

        for epoch in first_epoch..cfg.epochs {
            let clock = Instant::now();
            let mut rng = epoch_rng(cfg.seed, TRIPLET_STREAM, epoch);
            let mut shot_rng = epoch_rng(cfg.seed, SHOT_STREAM, epoch);
            let mut acc = StepLosses::default();
            for step in 0..steps {
                let batch = sample_triplets(source, target, b, cfg.clip, &mut rng)?;
                log.target_samples_consumed += batch.len();
                let shot_batch = if shots.is_empty() {
                    None
                } else {
                    Some(sample_labeled(shots, b, cfg.clip, &mut shot_rng)?)
                };
                let mut sg = build_step_graph(&model, &batch, shot_batch.as_ref(), cfg)?;
                if let Some((term, value)) = sg.terms.first_non_finite(&sg.graph) {
                    return Err(Error::NonFinite {
                        term,
                        value,
                        epoch,
                        step,
                    });
                }
                log.target_forward_passes += sg.target_forwards;
                let losses = sg.losses();
                apply_step(&mut model, &mut opt, &mut sg, cfg)?;
                accumulate(&mut acc, &losses);
                if self.record_steps {
                    log.steps.push(losses);
                }
            }
            log.epochs.push(EpochRecord {
                epoch,
                steps,
                mean: scale(acc, steps),
                wall_clock_s: clock.elapsed().as_secs_f64(),
            });
            log::debug!(
                "{} epoch {epoch}: total {:.4}",
                mode.name(),
                acc.total / steps as f64
            );
            self.checkpoint(&model, &opt, epoch + 1, mode)?;
        }
        Ok((model, log))
    }

    /// Encoder plus absolute head trained on source labels alone.
    pub fn train_source_only(&self, source: &[VideoSample]) -> Result<(Model, TrainLog)> {
        let cfg = &self.cfg;
        if source.is_empty() {
            return Err(Error::contract("source set is empty"));
        }
        let pool: Vec<(&Video, f64)> = source
            .iter()
            .map(|s| Ok((&s.video, label_of(s)?)))
            .collect::<Result<_>>()?;
        let (mut model, mut opt, _) = self.start(None)?;
        let b = cfg.batch_size;
        let steps = source.len().div_ceil(b);
        let mut log = TrainLog {
            mode: TrainMode::SourceOnly.name().into(),
            seed: cfg.seed,
            config: Some(cfg.clone()),
            ..TrainLog::default()
        };
        for epoch in 0..cfg.epochs {
            let clock = Instant::now();
            let mut rng = epoch_rng(cfg.seed, SOURCE_ONLY_STREAM, epoch);
            let mut acc = StepLosses::default();
            for step in 0..steps {
                let batch = sample_labeled(&pool, b, cfg.clip, &mut rng)?;
                let mut sg = build_source_only_graph(&model, &batch, cfg)?;
                if let Some((term, value)) = sg.terms.first_non_finite(&sg.graph) {
                    return Err(Error::NonFinite {
                        term,
                        value,
                        epoch,
                        step,
                    });
                }
                let losses = sg.losses();
                apply_step(&mut model, &mut opt, &mut sg, cfg)?;
                accumulate(&mut acc, &losses);
                if self.record_steps {
                    log.steps.push(losses);
                }
            }
            log.epochs.push(EpochRecord {
                epoch,
                steps,
                mean: scale(acc, steps),
                wall_clock_s: clock.elapsed().as_secs_f64(),
            });
            self.checkpoint(&model, &opt, epoch + 1, TrainMode::SourceOnly)?;
        }
        Ok((model, log))
    }
}

fn accumulate(acc: &mut StepLosses, s: &StepLosses) {
    acc.sup_rel += s.sup_rel;
    acc.sup_abs += s.sup_abs;
    acc.cons_s += s.cons_s;
    acc.cons_t += s.cons_t;
    acc.sup_extra += s.sup_extra;
    acc.total += s.total;
}

fn scale(s: StepLosses, n: usize) -> StepLosses {
    let k = 1.0 / n as f64;
    StepLosses {
        sup_rel: s.sup_rel * k,
        sup_abs: s.sup_abs * k,
        cons_s: s.cons_s * k,
        cons_t: s.cons_t * k,
        sup_extra: s.sup_extra * k,
        total: s.total * k,
    }
}

/// Picks `count` target ids uniformly without replacement, deterministically per seed.
pub fn choose_labeled_ids(ids: &[&str], count: usize, seed: u64) -> Result<Vec<String>> {
    if count > ids.len() {
        return Err(Error::contract(format!(
            "cannot pick {count} of {} target videos",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4 << 20);
    let picked = rand::seq::index::sample(&mut rng, ids.len(), count);
    let mut out: Vec<String> = picked.into_iter().map(|i| ids[i].to_string()).collect();
    out.sort();
    Ok(out)
}

/// Convenience wrappers with the plain `(data, config)` shape.
pub fn train_coreda(
    source: &[VideoSample],
    target: &[UnlabeledRef<'_>],
    model_config: ModelConfig,
    cfg: &TrainConfig,
) -> Result<(Model, TrainLog)> {
    Trainer::new(cfg.clone(), model_config).train_coreda(source, target)
}

pub fn train_source_only(
    source: &[VideoSample],
    model_config: ModelConfig,
    cfg: &TrainConfig,
) -> Result<(Model, TrainLog)> {
    Trainer::new(cfg.clone(), model_config).train_source_only(source)
}

pub fn train_semisupervised(
    source: &[VideoSample],
    target: &[UnlabeledRef<'_>],
    labeled_target: &BTreeMap<String, f64>,
    model_config: ModelConfig,
    cfg: &TrainConfig,
) -> Result<(Model, TrainLog)> {
    Trainer::new(cfg.clone(), model_config).train_semisupervised(source, target, labeled_target)
}
