//! Target-domain testing with multiple exemplars and background mixing.
//!
//! For each exemplar `m` the target video is blended with the exemplar's
//! median background, compared against the exemplar through the relative
//! head, and re-anchored on the exemplar's label. The prediction is the mean
//! of the `M` reconstructions. The absolute head is never consulted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{reconstruct, Model};
use crate::numkernel::{Graph, Tensor};
use crate::sampling::test_clip_tile;
use crate::synthdata::{Video, VideoSample, SCORE_MAX, SCORE_MIN};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixConfig {
    pub lambda: f64,
}

impl Default for MixConfig {
    fn default() -> Self {
        Self { lambda: 0.25 }
    }
}

impl MixConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "mixing lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Exemplar {
    pub id: String,
    pub label: f64,
    pub video: Video,
    /// Per-pixel temporal median, `[c×h×w]`.
    pub background: Tensor,
}

#[derive(Clone, Debug)]
pub struct ExemplarSet {
    pub exemplars: Vec<Exemplar>,
}

impl ExemplarSet {
    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.exemplars.iter().map(|e| e.label).collect()
    }
}

fn score_bin(label: f64, m: usize) -> usize {
    let width = (SCORE_MAX - SCORE_MIN) / m as f64;
    (((label - SCORE_MIN) / width).floor().max(0.0) as usize).min(m - 1)
}

/// Indices of the chosen exemplars, ordered by score bin.
///
/// The score range is cut into `m` equal-width bins and one sample is drawn
/// uniformly from each non-empty bin. Empty bins are filled by drawing
/// uniformly from the not-yet-chosen remainder of the whole pool.
pub fn select_exemplar_indices<R: Rng + ?Sized>(
    labels: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::contract("need at least one exemplar"));
    }
    if labels.len() < m {
        return Err(Error::contract(format!(
            "cannot select {m} exemplars from {} source videos",
            labels.len()
        )));
    }
    let mut bins = vec![Vec::new(); m];
    for (i, &y) in labels.iter().enumerate() {
        bins[score_bin(y, m)].push(i);
    }
    let mut chosen: Vec<Option<usize>> = bins
        .iter()
        .map(|b| (!b.is_empty()).then(|| b[rng.gen_range(0..b.len())]))
        .collect();
    for slot in 0..m {
        if chosen[slot].is_none() {
            let taken: Vec<usize> = chosen.iter().flatten().copied().collect();
            let free: Vec<usize> = (0..labels.len()).filter(|i| !taken.contains(i)).collect();
            chosen[slot] = Some(free[rng.gen_range(0..free.len())]);
        }
    }
    Ok(chosen
        .into_iter()
        .map(|c| c.expect("every slot filled"))
        .collect())
}

/// Stratified exemplar selection from the labeled source set.
pub fn select_exemplars<R: Rng + ?Sized>(
    source: &[VideoSample],
    m: usize,
    rng: &mut R,
) -> Result<ExemplarSet> {
    let labels = source
        .iter()
        .map(|s| {
            s.label
                .ok_or_else(|| Error::contract(format!("exemplar candidate {} is unlabeled", s.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let idx = select_exemplar_indices(&labels, m, rng)?;
    let exemplars = idx
        .into_iter()
        .map(|i| Exemplar {
            id: source[i].id.clone(),
            label: labels[i],
            video: source[i].video.clone(),
            background: extract_background(&source[i].video),
        })
        .collect();
    Ok(ExemplarSet { exemplars })
}

/// Random stream used for exemplar selection in a seeded run.
pub fn exemplar_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(5 << 20);
    rng
}

/// Per-pixel temporal median (lower-middle element for even lengths).
pub fn extract_background(video: &Video) -> Tensor {
    let d = video.dims;
    let n = d.frame_len();
    let mut col = vec![0.0f32; d.frames];
    let mut out = Vec::with_capacity(n);
    for p in 0..n {
        for (t, c) in col.iter_mut().enumerate() {
            *c = video.frames[t * n + p];
        }
        col.sort_by(f32::total_cmp);
        out.push(col[(d.frames - 1) / 2] as f64);
    }
    Tensor::new(vec![d.channels, d.height, d.width], out).expect("background matches frame dims")
}

/// `(1−λ)·x + λ·BG` for every frame, clipped to [0, 1].
pub fn mix_background(video: &Video, background: &Tensor, lambda: f64) -> Result<Video> {
    MixConfig { lambda }.validate()?;
    let d = video.dims;
    if background.shape() != [d.channels, d.height, d.width] {
        return Err(Error::dim(
            "mix_background",
            format!(
                "background {:?} vs frames {:?}",
                background.shape(),
                [d.channels, d.height, d.width]
            ),
        ));
    }
    let bg = background.data();
    let n = d.frame_len();
    let frames = video
        .frames
        .iter()
        .enumerate()
        .map(|(i, &x)| ((1.0 - lambda) * x as f64 + lambda * bg[i % n]).clamp(0.0, 1.0) as f32)
        .collect();
    Ok(Video { dims: d, frames })
}

fn check_video(model: &Model, video: &Video, clip_len: usize) -> Result<()> {
    let c = &model.config;
    let d = video.dims;
    if (d.channels, d.height, d.width) != (c.channels, c.height, c.width) || clip_len != c.clip_len
    {
        return Err(Error::ConfigConflict(format!(
            "video {}×{}×{} with clip length {clip_len} does not fit model {}×{}×{} / {}",
            d.channels, d.height, d.width, c.channels, c.height, c.width, c.clip_len
        )));
    }
    Ok(())
}

/// Test-time features `[K'×d]` of a full video.
pub fn encode_video(model: &Model, video: &Video, clip_len: usize) -> Result<Tensor> {
    check_video(model, video, clip_len)?;
    let clips = test_clip_tile(video, clip_len)?;
    let mut g = Graph::new();
    let b = model.bind_frozen(&mut g);
    let f = b.encode(&mut g, model, &clips)?;
    Ok(g.value(f).clone())
}

fn relative(model: &Model, target_feats: &Tensor, exemplar_feats: &Tensor) -> Result<f64> {
    let mut g = Graph::new();
    let b = model.bind_frozen(&mut g);
    let ft = g.constant(target_feats.clone());
    let fe = g.constant(exemplar_feats.clone());
    let delta = b.predict_rel(&mut g, model, ft, fe)?;
    Ok(g.value(delta).item())
}

/// Absolute-head prediction over the full video (Source-Only baseline path).
pub fn predict_absolute(model: &Model, video: &Video, clip_len: usize) -> Result<f64> {
    let feats = encode_video(model, video, clip_len)?;
    let mut g = Graph::new();
    let b = model.bind_frozen(&mut g);
    let f = g.constant(feats);
    let y = b.predict_abs(&mut g, model, f)?;
    Ok(g.value(y).item())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetPrediction {
    pub prediction: f64,
    /// `Δŷ_{T−E,m} + y_{E,m}` for every exemplar, in exemplar order.
    pub per_exemplar: Vec<f64>,
}

/// Exemplar features computed once and reused across target videos.
#[derive(Clone, Debug)]
pub struct PreparedExemplars<'a> {
    pub set: &'a ExemplarSet,
    pub features: Vec<Tensor>,
}

pub fn prepare_exemplars<'a>(
    model: &Model,
    set: &'a ExemplarSet,
    clip_len: usize,
) -> Result<PreparedExemplars<'a>> {
    if set.is_empty() {
        return Err(Error::contract("exemplar set is empty"));
    }
    let features = set
        .exemplars
        .iter()
        .map(|e| encode_video(model, &e.video, clip_len))
        .collect::<Result<_>>()?;
    Ok(PreparedExemplars { set, features })
}

/// Multi-exemplar prediction for one target video; `mix = None` skips blending.
pub fn predict_target_prepared(
    model: &Model,
    video: &Video,
    ex: &PreparedExemplars<'_>,
    mix: Option<MixConfig>,
    clip_len: usize,
) -> Result<TargetPrediction> {
    check_video(model, video, clip_len)?;
    let mut per_exemplar = Vec::with_capacity(ex.features.len());
    let plain = if mix.is_none() {
        Some(encode_video(model, video, clip_len)?)
    } else {
        None
    };
    for (e, fe) in ex.set.exemplars.iter().zip(&ex.features) {
        let ft = match (mix, &plain) {
            (Some(m), _) => encode_video(
                model,
                &mix_background(video, &e.background, m.lambda)?,
                clip_len,
            )?,
            (None, Some(f)) => f.clone(),
            (None, None) => unreachable!(),
        };
        let delta = relative(model, &ft, fe)?;
        per_exemplar.push(reconstruct(delta, e.label));
    }
    let prediction = per_exemplar.iter().sum::<f64>() / per_exemplar.len() as f64;
    Ok(TargetPrediction {
        prediction,
        per_exemplar,
    })
}

pub fn predict_target(
    model: &Model,
    video: &Video,
    ex: &ExemplarSet,
    mix: Option<MixConfig>,
    clip_len: usize,
) -> Result<TargetPrediction> {
    let prepared = prepare_exemplars(model, ex, clip_len)?;
    predict_target_prepared(model, video, &prepared, mix, clip_len)
}

/// How a trained model turns a video into a score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Predictor {
    /// Relative head against exemplars, optionally with background mixing.
    Exemplar { mix: Option<MixConfig> },
    /// Absolute head directly.
    Absolute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub true_label: Option<f64>,
    pub prediction: f64,
    pub per_exemplar: Vec<f64>,
}

/// Predicts every video, in input order, on up to `workers` threads.
pub fn predict_all(
    model: &Model,
    videos: &[(&str, &Video, Option<f64>)],
    exemplars: Option<&ExemplarSet>,
    predictor: Predictor,
    clip_len: usize,
    workers: usize,
) -> Result<Vec<PredictionRow>> {
    let prepared = match (predictor, exemplars) {
        (Predictor::Exemplar { .. }, Some(set)) => Some(prepare_exemplars(model, set, clip_len)?),
        (Predictor::Exemplar { .. }, None) => {
            return Err(Error::contract("exemplar prediction needs an exemplar set"))
        }
        (Predictor::Absolute, _) => None,
    };
    let one = |&(id, video, label): &(&str, &Video, Option<f64>)| -> Result<PredictionRow> {
        let (prediction, per_exemplar) = match (predictor, &prepared) {
            (Predictor::Exemplar { mix }, Some(p)) => {
                let r = predict_target_prepared(model, video, p, mix, clip_len)?;
                (r.prediction, r.per_exemplar)
            }
            _ => (predict_absolute(model, video, clip_len)?, Vec::new()),
        };
        Ok(PredictionRow {
            id: id.to_string(),
            true_label: label,
            prediction,
            per_exemplar,
        })
    };
    if workers <= 1 {
        return videos.iter().map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::State(format!("cannot start worker pool: {e}")))?;
    pool.install(|| videos.par_iter().map(one).collect())
}
