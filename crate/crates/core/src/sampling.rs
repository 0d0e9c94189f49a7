//! Segment-based clip sampling for training and full-coverage tiling for test.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::Tensor;
use crate::synthdata::Video;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipSpec {
    /// Number of segments (one clip per segment).
    pub segments: usize,
    /// Consecutive frames per clip.
    pub clip_len: usize,
}

impl Default for ClipSpec {
    fn default() -> Self {
        Self {
            segments: 12,
            clip_len: 12,
        }
    }
}

impl ClipSpec {
    pub fn desk() -> Self {
        Self {
            segments: 4,
            clip_len: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 || self.clip_len == 0 {
            return Err(Error::Config(format!(
                "clip spec needs K >= 1 and l >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.segments * self.clip_len
    }
}

/// Frame indices for one stochastic training sample.
///
/// Segment `s` spans `[s·⌊L/K⌋, (s+1)·⌊L/K⌋)`; a start is drawn uniformly among
/// the positions that keep all `l` frames inside the segment. The trailing
/// `L mod K` frames are never used.
pub fn train_clip_indices<R: Rng + ?Sized>(
    len: usize,
    spec: ClipSpec,
    rng: &mut R,
) -> Result<Vec<usize>> {
    spec.validate()?;
    let seg = len / spec.segments;
    if seg < spec.clip_len {
        return Err(Error::contract(format!(
            "video of L={len} frames cannot supply K={} segments of l={} frames",
            spec.segments, spec.clip_len
        )));
    }
    let slack = seg - spec.clip_len;
    let mut idx = Vec::with_capacity(spec.frames());
    for s in 0..spec.segments {
        let start = s * seg
            + if slack == 0 {
                0
            } else {
                rng.gen_range(0..=slack)
            };
        idx.extend(start..start + spec.clip_len);
    }
    Ok(idx)
}

/// Start frames of the test-time tiling: `⌈L/l⌉` clips, the last one
/// back-aligned to the video end when `l` does not divide `L`.
pub fn test_clip_starts(len: usize, clip_len: usize) -> Result<Vec<usize>> {
    if clip_len == 0 || len < clip_len {
        return Err(Error::contract(format!(
            "video of L={len} frames is shorter than clip length l={clip_len}"
        )));
    }
    let n = len.div_ceil(clip_len);
    Ok((0..n)
        .map(|k| {
            if k + 1 == n {
                len - clip_len
            } else {
                k * clip_len
            }
        })
        .collect())
}

/// Stochastic training clips, `[(K·l)×c×h×w]`.
pub fn train_clip_sample<R: Rng + ?Sized>(
    video: &Video,
    spec: ClipSpec,
    rng: &mut R,
) -> Result<Tensor> {
    let idx = train_clip_indices(video.dims.frames, spec, rng)?;
    Ok(gather_frames(video, &idx))
}

/// Deterministic test clips covering every frame, `[(K'·l)×c×h×w]`.
pub fn test_clip_tile(video: &Video, clip_len: usize) -> Result<Tensor> {
    let starts = test_clip_starts(video.dims.frames, clip_len)?;
    let idx: Vec<usize> = starts.iter().flat_map(|&s| s..s + clip_len).collect();
    Ok(gather_frames(video, &idx))
}

pub(crate) fn gather_frames(video: &Video, idx: &[usize]) -> Tensor {
    let d = video.dims;
    let mut data = Vec::with_capacity(idx.len() * d.frame_len());
    for &t in idx {
        data.extend(video.frame(t).iter().map(|&v| v as f64));
    }
    Tensor::new(vec![idx.len(), d.channels, d.height, d.width], data)
        .expect("gathered frames match dims")
}
