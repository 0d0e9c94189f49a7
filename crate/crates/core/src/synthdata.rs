//! Synthetic domain-shift benchmark.
//!
//! Each video shows a Gaussian blob travelling once around a circle over a
//! static background. Skill is encoded only in the per-frame positional jitter
//! of the blob, which is generated identically in every domain; domains differ
//! in background pattern, gain, offset and sensor noise.
//!
//! Datasets are persisted as a JSON manifest next to a raw little-endian `f32`
//! blob. Target labels never enter the target manifest; they go to a separate
//! sealed sidecar read only at evaluation time.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SCORE_MIN: f64 = 6.0;
pub const SCORE_MAX: f64 = 30.0;
pub const DATASET_FORMAT: &str = "coreda-dataset/1";
pub const SEALED_FORMAT: &str = "coreda-sealed-labels/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    fn stream_base(self) -> u64 {
        match self {
            Domain::Source => 0,
            Domain::Target => 1 << 32,
        }
    }

    fn id_prefix(self) -> &'static str {
        match self {
            Domain::Source => "src",
            Domain::Target => "tgt",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundKind {
    HorizontalGrating,
    Checkerboard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub background_kind: BackgroundKind,
    /// Spatial period in pixels (full light/dark cycle).
    pub background_period: usize,
    pub gain: f64,
    pub offset: f64,
    pub noise_sigma: f64,
}

impl DomainConfig {
    pub fn source_default() -> Self {
        Self {
            background_kind: BackgroundKind::HorizontalGrating,
            background_period: 8,
            gain: 1.0,
            offset: 0.0,
            noise_sigma: 0.01,
        }
    }

    pub fn target_default() -> Self {
        Self {
            background_kind: BackgroundKind::Checkerboard,
            background_period: 4,
            gain: 1.3,
            offset: 0.1,
            noise_sigma: 0.03,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gain.is_nan() || self.gain <= 0.0 {
            return Err(Error::Config(format!(
                "domain gain must be > 0, got {}",
                self.gain
            )));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return Err(Error::Config(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.background_period < 2 {
            return Err(Error::Config(
                "background_period must be at least 2 pixels".into(),
            ));
        }
        if !self.offset.is_finite() {
            return Err(Error::Config("domain offset must be finite".into()));
        }
        Ok(())
    }

    /// Pre-gain background intensity at pixel (`y`, `x`), always in [0.25, 0.75].
    pub fn background_value(&self, y: usize, x: usize) -> f64 {
        match self.background_kind {
            BackgroundKind::HorizontalGrating => {
                0.5 + 0.25 * (2.0 * PI * y as f64 / self.background_period as f64).sin()
            }
            BackgroundKind::Checkerboard => {
                let cell = (self.background_period / 2).max(1);
                if (y / cell + x / cell).is_multiple_of(2) {
                    0.75
                } else {
                    0.25
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub blob_sigma: f64,
    pub blob_amplitude: f64,
    pub jitter_max: f64,
    pub seed: u64,
    /// Round drawn skills to integers (Likert-sum style labels).
    #[serde(default)]
    pub integer_labels: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            frames: 64,
            channels: 1,
            height: 16,
            width: 16,
            blob_sigma: 1.5,
            blob_amplitude: 0.5,
            jitter_max: 3.0,
            seed: 0,
            integer_labels: false,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::Config(format!(
                "frames must be >= 2, got {}",
                self.frames
            )));
        }
        if self.channels < 1 {
            return Err(Error::Config("channels must be >= 1".into()));
        }
        if self.height < 8 || self.width < 8 {
            return Err(Error::Config(format!(
                "frames must be at least 8×8 pixels, got {}×{}",
                self.height, self.width
            )));
        }
        let limit = self.height.min(self.width) as f64 / 4.0;
        if !(self.jitter_max >= 0.0 && self.jitter_max < limit) {
            return Err(Error::Config(format!(
                "jitter_max must lie in [0, {limit}), got {}",
                self.jitter_max
            )));
        }
        if self.blob_sigma.is_nan() || self.blob_sigma <= 0.0 {
            return Err(Error::Config("blob_sigma must be > 0".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> VideoDims {
        VideoDims {
            frames: self.frames,
            channels: self.channels,
            height: self.height,
            width: self.width,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoDims {
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl VideoDims {
    pub fn frame_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn numel(&self) -> usize {
        self.frames * self.frame_len()
    }

    pub fn byte_len(&self) -> usize {
        self.numel() * 4
    }
}

/// Frames of one video, `L×c×h×w`, row-major, values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Video {
    pub dims: VideoDims,
    pub frames: Vec<f32>,
}

impl Video {
    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.dims.frame_len();
        &self.frames[t * n..(t + 1) * n]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoSample {
    pub id: String,
    pub domain: Domain,
    pub label: Option<f64>,
    pub video: Video,
}

impl VideoSample {
    pub fn unlabeled(&self) -> UnlabeledRef<'_> {
        UnlabeledRef {
            id: &self.id,
            video: &self.video,
        }
    }
}

/// Label-free view of a sample; the only form in which unsupervised training
/// sees target data.
#[derive(Clone, Copy, Debug)]
pub struct UnlabeledRef<'a> {
    pub id: &'a str,
    pub video: &'a Video,
}

/// Ground-truth generation trace, used by tests and diagnostics.
#[derive(Clone, Debug)]
pub struct GenTrace {
    /// Blob centre (x, y) per frame, including jitter.
    pub centers: Vec<(f64, f64)>,
    /// Jitter-free path centre per frame.
    pub path: Vec<(f64, f64)>,
    pub jitter_amplitude: f64,
}

pub fn jitter_amplitude(skill: f64, jitter_max: f64) -> f64 {
    jitter_max * (SCORE_MAX - skill) / (SCORE_MAX - SCORE_MIN)
}

fn check_skill(skill: f64) -> Result<()> {
    if !(SCORE_MIN..=SCORE_MAX).contains(&skill) {
        return Err(Error::contract(format!(
            "skill {skill} outside [{SCORE_MIN}, {SCORE_MAX}]"
        )));
    }
    Ok(())
}

/// Renders one labeled video of the given skill.
pub fn gen_video<R: Rng + ?Sized>(
    id: impl Into<String>,
    domain: Domain,
    skill: f64,
    dom: &DomainConfig,
    gen: &GenConfig,
    rng: &mut R,
) -> Result<VideoSample> {
    let (video, _) = gen_video_traced(skill, dom, gen, rng)?;
    Ok(VideoSample {
        id: id.into(),
        domain,
        label: Some(skill),
        video,
    })
}

pub fn gen_video_traced<R: Rng + ?Sized>(
    skill: f64,
    dom: &DomainConfig,
    gen: &GenConfig,
    rng: &mut R,
) -> Result<(Video, GenTrace)> {
    check_skill(skill)?;
    gen.validate()?;
    dom.validate()?;

    let dims = gen.dims();
    let (h, w) = (gen.height, gen.width);
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let radius = h.min(w) as f64 / 5.0;
    let sj = jitter_amplitude(skill, gen.jitter_max);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let noise =
        (dom.noise_sigma > 0.0).then(|| Normal::new(0.0, dom.noise_sigma).expect("valid sigma"));

    let background: Vec<f64> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (y, x)))
        .map(|(y, x)| dom.background_value(y, x))
        .collect();

    let support = 3.0 * gen.blob_sigma;
    let two_s2 = 2.0 * gen.blob_sigma * gen.blob_sigma;
    let mut frames = Vec::with_capacity(dims.numel());
    let mut centers = Vec::with_capacity(gen.frames);
    let mut path = Vec::with_capacity(gen.frames);

    for t in 0..gen.frames {
        let angle = phase + 2.0 * PI * t as f64 / gen.frames as f64;
        let (px, py) = (cx + radius * angle.cos(), cy + radius * angle.sin());
        let (jx, jy) = if sj > 0.0 {
            (rng.gen_range(-sj..=sj), rng.gen_range(-sj..=sj))
        } else {
            (0.0, 0.0)
        };
        let (bx, by) = (px + jx, py + jy);
        path.push((px, py));
        centers.push((bx, by));

        for _c in 0..gen.channels {
            for y in 0..h {
                for x in 0..w {
                    let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
                    let blob = if d2.sqrt() <= support {
                        gen.blob_amplitude * (-d2 / two_s2).exp()
                    } else {
                        0.0
                    };
                    let mut v = dom.gain * (background[y * w + x] + blob) + dom.offset;
                    if let Some(n) = &noise {
                        v += n.sample(rng);
                    }
                    frames.push(v.clamp(0.0, 1.0) as f32);
                }
            }
        }
    }
    Ok((
        Video { dims, frames },
        GenTrace {
            centers,
            path,
            jitter_amplitude: sj,
        },
    ))
}

fn sample_rng(seed: u64, domain: Domain, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(domain.stream_base() + index as u64);
    rng
}

/// Generates `n` samples with skills uniform on [6, 30].
///
/// Each sample draws from its own random stream derived from `(seed, domain,
/// index)`, so generation order does not affect content. Labels are kept on
/// the returned samples; use [`strip_labels`] before persisting a target set.
pub fn gen_samples(
    n: usize,
    domain: Domain,
    dom: &DomainConfig,
    gen: &GenConfig,
    seed: u64,
) -> Result<Vec<VideoSample>> {
    if n == 0 {
        return Err(Error::contract("dataset size must be >= 1"));
    }
    gen.validate()?;
    dom.validate()?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, domain, i);
            let mut skill = rng.gen_range(SCORE_MIN..=SCORE_MAX);
            if gen.integer_labels {
                skill = skill.round();
            }
            gen_video(
                format!("{}-{i:05}", domain.id_prefix()),
                domain,
                skill,
                dom,
                gen,
                &mut rng,
            )
        })
        .collect()
}

/// Removes labels, returning them keyed by sample id.
pub fn strip_labels(samples: &mut [VideoSample]) -> BTreeMap<String, f64> {
    samples
        .iter_mut()
        .filter_map(|s| s.label.take().map(|l| (s.id.clone(), l)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub offset: u64,
    /// Absent for unlabeled sets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<f64>,
    pub domain: Domain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: String,
    pub gen: GenConfig,
    pub domain_config: DomainConfig,
    pub dims: VideoDims,
    pub blob_file: String,
    pub blob_bytes: u64,
    pub blob_sha256: String,
    pub samples: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub gen: GenConfig,
    pub domain_config: DomainConfig,
    pub samples: Vec<VideoSample>,
}

impl Dataset {
    pub fn unlabeled(&self) -> Vec<UnlabeledRef<'_>> {
        self.samples.iter().map(VideoSample::unlabeled).collect()
    }
}

/// Paths of the two files backing a dataset named `stem` in `dir`.
pub fn dataset_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{stem}.manifest.json")),
        dir.join(format!("{stem}.blob")),
    )
}

/// Generates and persists a dataset. Returns the in-memory samples (with
/// labels stripped when `labeled` is false) and, for unlabeled sets, the
/// withheld labels.
#[allow(clippy::too_many_arguments)]
pub fn gen_dataset(
    n: usize,
    labeled: bool,
    domain: Domain,
    dom: &DomainConfig,
    gen: &GenConfig,
    seed: u64,
    dir: &Path,
    stem: &str,
) -> Result<(Dataset, BTreeMap<String, f64>)> {
    let mut samples = gen_samples(n, domain, dom, gen, seed)?;
    let withheld = if labeled {
        BTreeMap::new()
    } else {
        strip_labels(&mut samples)
    };
    let ds = Dataset {
        gen: GenConfig {
            seed,
            ..gen.clone()
        },
        domain_config: dom.clone(),
        samples,
    };
    save_dataset(&ds, dir, stem)?;
    Ok((ds, withheld))
}

pub fn save_dataset(ds: &Dataset, dir: &Path, stem: &str) -> Result<PathBuf> {
    let dims = ds.gen.dims();
    let (manifest_path, blob_path) = dataset_paths(dir, stem);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut blob = Vec::with_capacity(ds.samples.len() * dims.byte_len());
    let mut entries = Vec::with_capacity(ds.samples.len());
    let mut seen = HashSet::new();
    for s in &ds.samples {
        if s.video.dims != dims {
            return Err(Error::dim(
                "save_dataset",
                format!(
                    "sample {} has dims {:?}, expected {dims:?}",
                    s.id, s.video.dims
                ),
            ));
        }
        if !seen.insert(s.id.as_str()) {
            return Err(Error::contract(format!("duplicate sample id {}", s.id)));
        }
        entries.push(ManifestEntry {
            id: s.id.clone(),
            offset: blob.len() as u64,
            label: s.label,
            domain: s.domain,
        });
        for v in &s.video.frames {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT.to_string(),
        gen: ds.gen.clone(),
        domain_config: ds.domain_config.clone(),
        dims,
        blob_file: blob_path
            .file_name()
            .unwrap()
            .to_string_lossy()
            .into_owned(),
        blob_bytes: blob.len() as u64,
        blob_sha256: hex_digest(&blob),
        samples: entries,
    };
    fs::write(&blob_path, &blob).map_err(|e| Error::io(&blob_path, e))?;
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::format(manifest_path, e.to_string()))?;
    let version = raw
        .get("format_version")
        .and_then(|v| v.as_str())
        .unwrap_or("<missing>");
    if version != DATASET_FORMAT {
        return Err(Error::Version {
            path: manifest_path.to_path_buf(),
            found: version.to_string(),
            expected: DATASET_FORMAT.to_string(),
        });
    }
    let manifest: DatasetManifest =
        serde_json::from_value(raw).map_err(|e| Error::format(manifest_path, e.to_string()))?;

    let blob_path = manifest_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&manifest.blob_file);
    let blob = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    let per = manifest.dims.byte_len() as u64;
    let expected = per * manifest.samples.len() as u64;
    if blob.len() as u64 != expected || manifest.blob_bytes != expected {
        return Err(Error::format(
            &blob_path,
            format!(
                "blob holds {} bytes, manifest implies {expected}",
                blob.len()
            ),
        ));
    }
    if hex_digest(&blob) != manifest.blob_sha256 {
        return Err(Error::format(&blob_path, "checksum mismatch"));
    }

    let mut seen = HashSet::new();
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for (i, e) in manifest.samples.iter().enumerate() {
        if e.offset != i as u64 * per {
            return Err(Error::format(
                manifest_path,
                format!(
                    "entry {} has offset {}, expected {}",
                    e.id,
                    e.offset,
                    i as u64 * per
                ),
            ));
        }
        if !seen.insert(e.id.as_str()) {
            return Err(Error::format(
                manifest_path,
                format!("duplicate id {}", e.id),
            ));
        }
        if let Some(l) = e.label {
            if !(SCORE_MIN..=SCORE_MAX).contains(&l) {
                return Err(Error::format(
                    manifest_path,
                    format!("label {l} of {} out of range", e.id),
                ));
            }
        }
        let bytes = &blob[e.offset as usize..(e.offset + per) as usize];
        let frames = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        samples.push(VideoSample {
            id: e.id.clone(),
            domain: e.domain,
            label: e.label,
            video: Video {
                dims: manifest.dims,
                frames,
            },
        });
    }
    Ok(Dataset {
        gen: manifest.gen,
        domain_config: manifest.domain_config,
        samples,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SealedLabels {
    format_version: String,
    labels: BTreeMap<String, f64>,
}

pub fn write_sealed_labels(path: &Path, labels: &BTreeMap<String, f64>) -> Result<()> {
    let doc = SealedLabels {
        format_version: SEALED_FORMAT.into(),
        labels: labels.clone(),
    };
    fs::write(
        path,
        serde_json::to_string_pretty(&doc).expect("labels serialize"),
    )
    .map_err(|e| Error::io(path, e))
}

pub fn read_sealed_labels(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: SealedLabels =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if doc.format_version != SEALED_FORMAT {
        return Err(Error::Version {
            path: path.into(),
            found: doc.format_version,
            expected: SEALED_FORMAT.into(),
        });
    }
    Ok(doc.labels)
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Output of the hand-crafted skill estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEstimate {
    pub score: f64,
    /// Set when the video carried no usable foreground signal.
    pub degenerate: bool,
}

/// Parameter-free skill estimate from blob-centroid jitter.
///
/// Subtracts the per-pixel temporal median, takes the intensity-weighted
/// centroid of the positive residual in every frame, smooths the centroid
/// track with a centred 5-frame moving average and maps the mean residual
/// displacement back onto the score scale.
pub fn oracle_skill_estimate(video: &Video, jitter_max: f64) -> OracleEstimate {
    const WINDOW: usize = 5;
    let d = video.dims;
    let (h, w) = (d.height, d.width);
    let plane = h * w;
    let fallback = OracleEstimate {
        score: (SCORE_MIN + SCORE_MAX) / 2.0,
        degenerate: true,
    };

    // Channel-averaged intensity per frame.
    let mut gray = vec![0.0f64; d.frames * plane];
    for t in 0..d.frames {
        let f = video.frame(t);
        for c in 0..d.channels {
            for p in 0..plane {
                gray[t * plane + p] += f[c * plane + p] as f64 / d.channels as f64;
            }
        }
    }
    let mut median = vec![0.0f64; plane];
    let mut column = vec![0.0f64; d.frames];
    for p in 0..plane {
        for t in 0..d.frames {
            column[t] = gray[t * plane + p];
        }
        column.sort_by(f64::total_cmp);
        median[p] = column[(d.frames - 1) / 2];
    }

    let mut centroids = Vec::with_capacity(d.frames);
    for t in 0..d.frames {
        let (mut mass, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let r = (gray[t * plane + y * w + x] - median[y * w + x]).max(0.0);
                mass += r;
                sx += r * x as f64;
                sy += r * y as f64;
            }
        }
        if mass <= 1e-12 {
            return fallback;
        }
        centroids.push((sx / mass, sy / mass));
    }
    if jitter_max <= 0.0 {
        return fallback;
    }

    let n = centroids.len();
    let half = WINDOW / 2;
    let mut total = 0.0;
    for t in 0..n {
        let lo = t.saturating_sub(half);
        let hi = (t + half + 1).min(n);
        let k = (hi - lo) as f64;
        let (mx, my) = centroids[lo..hi]
            .iter()
            .fold((0.0, 0.0), |(a, b), c| (a + c.0, b + c.1));
        let (dx, dy) = (centroids[t].0 - mx / k, centroids[t].1 - my / k);
        total += (dx * dx + dy * dy).sqrt();
    }
    let mean = total / n as f64;
    let score =
        (SCORE_MAX - (SCORE_MAX - SCORE_MIN) * mean / jitter_max).clamp(SCORE_MIN, SCORE_MAX);
    OracleEstimate {
        score,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_source() -> DomainConfig {
        DomainConfig {
            noise_sigma: 0.0,
            ..DomainConfig::source_default()
        }
    }

    #[test]
    fn jitter_amplitude_endpoints() {
        assert_eq!(jitter_amplitude(30.0, 3.0), 0.0);
        assert_eq!(jitter_amplitude(6.0, 3.0), 3.0);
    }

    #[test]
    fn top_skill_follows_smooth_path_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (_, trace) =
            gen_video_traced(30.0, &quiet_source(), &GenConfig::default(), &mut rng).unwrap();
        assert_eq!(trace.jitter_amplitude, 0.0);
        assert_eq!(trace.centers, trace.path);
    }

    #[test]
    fn lowest_skill_jitters_up_to_max() {
        let gen = GenConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (_, trace) = gen_video_traced(6.0, &quiet_source(), &gen, &mut rng).unwrap();
        assert_eq!(trace.jitter_amplitude, gen.jitter_max);
        let max_dev = trace
            .centers
            .iter()
            .zip(&trace.path)
            .map(|(c, p)| (c.0 - p.0).abs().max((c.1 - p.1).abs()))
            .fold(0.0, f64::max);
        assert!(max_dev <= gen.jitter_max && max_dev > 0.5 * gen.jitter_max);
    }

    #[test]
    fn skill_out_of_range_is_contract_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = gen_video(
            "x",
            Domain::Source,
            5.9,
            &quiet_source(),
            &GenConfig::default(),
            &mut rng,
        );
        assert!(matches!(r, Err(Error::Contract(_))));
        let r = gen_video(
            "x",
            Domain::Source,
            30.5,
            &quiet_source(),
            &GenConfig::default(),
            &mut rng,
        );
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn frames_match_closed_form_without_noise() {
        let gen = GenConfig::default();
        let dom = quiet_source();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (video, trace) = gen_video_traced(20.0, &dom, &gen, &mut rng).unwrap();
        let mut global_max = 0.0f32;
        for (t, &(bx, by)) in trace.centers.iter().enumerate() {
            let frame = video.frame(t);
            // pixel nearest the blob centre
            let (x, y) = (
                bx.round().clamp(0.0, 15.0) as usize,
                by.round().clamp(0.0, 15.0) as usize,
            );
            let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
            let blob = 0.5 * (-d2 / (2.0 * 1.5 * 1.5)).exp();
            let want = (dom.background_value(y, x) + blob).min(1.0) as f32;
            assert_eq!(frame[y * 16 + x], want, "frame {t}");
            global_max = frame.iter().copied().fold(global_max, f32::max);
        }
        assert!(global_max <= 1.0);
        assert!(global_max as f64 <= 0.75 + 0.5);
        assert!(video.frames.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn samples_are_deterministic_and_in_range() {
        let gen = GenConfig {
            frames: 8,
            ..GenConfig::default()
        };
        let a = gen_samples(
            100,
            Domain::Source,
            &DomainConfig::source_default(),
            &gen,
            7,
        )
        .unwrap();
        let b = gen_samples(
            100,
            Domain::Source,
            &DomainConfig::source_default(),
            &gen,
            7,
        )
        .unwrap();
        assert_eq!(a, b);
        let labels: Vec<f64> = a.iter().map(|s| s.label.unwrap()).collect();
        assert!(labels.iter().all(|l| (6.0..=30.0).contains(l)));
        assert!(a
            .iter()
            .all(|s| s.video.frames.iter().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn integer_label_flag_rounds() {
        let gen = GenConfig {
            frames: 4,
            integer_labels: true,
            ..GenConfig::default()
        };
        let s = gen_samples(20, Domain::Source, &DomainConfig::source_default(), &gen, 1).unwrap();
        assert!(s.iter().all(|s| s.label.unwrap().fract() == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(GenConfig {
            frames: 1,
            ..GenConfig::default()
        }
        .validate()
        .is_err());
        assert!(GenConfig {
            height: 7,
            ..GenConfig::default()
        }
        .validate()
        .is_err());
        assert!(GenConfig {
            jitter_max: 4.0,
            ..GenConfig::default()
        }
        .validate()
        .is_err());
        assert!(DomainConfig {
            gain: 0.0,
            ..DomainConfig::source_default()
        }
        .validate()
        .is_err());
        assert!(DomainConfig {
            noise_sigma: -0.1,
            ..DomainConfig::source_default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn backgrounds_stay_in_quarter_band() {
        for dom in [
            DomainConfig::source_default(),
            DomainConfig::target_default(),
        ] {
            for y in 0..16 {
                for x in 0..16 {
                    let v = dom.background_value(y, x);
                    assert!((0.25..=0.75).contains(&v));
                }
            }
        }
    }

    #[test]
    fn oracle_top_skill_near_thirty() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = gen_video(
            "v",
            Domain::Source,
            30.0,
            &quiet_source(),
            &GenConfig::default(),
            &mut rng,
        )
        .unwrap();
        let est = oracle_skill_estimate(&s.video, 3.0);
        assert!(!est.degenerate);
        assert!(est.score >= 29.0, "{}", est.score);
    }

    #[test]
    fn oracle_black_video_falls_back() {
        let dims = GenConfig::default().dims();
        let v = Video {
            dims,
            frames: vec![0.0; dims.numel()],
        };
        let est = oracle_skill_estimate(&v, 3.0);
        assert_eq!(
            est,
            OracleEstimate {
                score: 18.0,
                degenerate: true
            }
        );
    }
}
