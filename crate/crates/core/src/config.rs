//! Run configuration: every hyperparameter under a named key, loaded from TOML
//! on top of a built-in profile.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::MixConfig;
use crate::model::{EncoderConfig, ModelConfig};
use crate::synthdata::{DomainConfig, GenConfig};
use crate::trainer::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Published hyperparameters (long videos, wide encoder, 150 epochs).
    Full,
    /// Reduced sizes for a single CPU core.
    Desk,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Profile::Full),
            "desk" => Ok(Profile::Desk),
            other => Err(Error::Config(format!(
                "unknown profile `{other}` (expected full or desk)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub n_source: usize,
    pub n_target: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadConfig {
    /// Absolute-head outputs are `center + scale·raw`, relative ones `scale·raw`.
    pub score_center: f64,
    pub score_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Number of test-time exemplars.
    pub exemplars: usize,
    pub mix: MixConfig,
    /// Blend target videos with exemplar backgrounds before comparison.
    pub background_mixing: bool,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub data_dir: PathBuf,
    pub run_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; copied into the generator and trainer.
    pub seed: u64,
    pub data: DataConfig,
    pub gen: GenConfig,
    pub source_domain: DomainConfig,
    pub target_domain: DomainConfig,
    pub encoder: EncoderConfig,
    pub head: HeadConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn profile(p: Profile) -> Self {
        let (gen, encoder, train) = match p {
            Profile::Full => (
                GenConfig {
                    frames: 144,
                    ..GenConfig::default()
                },
                EncoderConfig::default(),
                TrainConfig::default(),
            ),
            Profile::Desk => (
                GenConfig::default(),
                EncoderConfig::desk(),
                TrainConfig::desk(),
            ),
        };
        Self {
            seed: 0,
            data: DataConfig {
                n_source: 120,
                n_target: 60,
            },
            gen,
            source_domain: DomainConfig::source_default(),
            target_domain: DomainConfig::target_default(),
            encoder,
            head: HeadConfig {
                score_center: 18.0,
                score_scale: 12.0,
            },
            train,
            eval: EvalConfig {
                exemplars: 10,
                mix: MixConfig::default(),
                background_mixing: true,
                workers: 1,
            },
            paths: PathsConfig {
                data_dir: "data".into(),
                run_dir: "runs".into(),
            },
        }
    }

    /// Overrides the profile with the keys present in `text`.
    pub fn from_toml_str(profile: Profile, text: &str) -> Result<Self> {
        let user: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("cannot parse config: {e}")))?;
        for section in ["gen", "train"] {
            if user.get(section).and_then(|s| s.get("seed")).is_some() {
                return Err(Error::Config(format!(
                    "set the seed at top level, not in [{section}]"
                )));
            }
        }
        let mut base = toml::Table::try_from(Self::profile(profile)).expect("profile serializes");
        merge(&mut base, user);
        let mut cfg: Self = toml::Value::Table(base)
            .try_into()
            .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.set_seed(cfg.seed);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(profile: Profile, path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::from_toml_str(profile, &text)
            }
            None => {
                let cfg = Self::profile(profile);
                cfg.validate()?;
                Ok(cfg)
            }
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.gen.seed = seed;
        self.train.seed = seed;
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            score_center: self.head.score_center,
            score_scale: self.head.score_scale,
            ..ModelConfig::new(
                self.encoder,
                self.gen.channels,
                self.gen.height,
                self.gen.width,
                self.train.clip.clip_len,
            )
        }
    }

    /// `None` when background mixing is switched off.
    pub fn mix(&self) -> Option<MixConfig> {
        self.eval.background_mixing.then_some(self.eval.mix)
    }

    pub fn validate(&self) -> Result<()> {
        self.gen.validate()?;
        self.source_domain.validate()?;
        self.target_domain.validate()?;
        self.train.validate()?;
        self.eval.mix.validate()?;
        self.model_config().validate()?;
        if self.train.clip.frames() > self.gen.frames {
            return Err(Error::Config(format!(
                "clips of {}×{} frames do not fit videos of {} frames",
                self.train.clip.segments, self.train.clip.clip_len, self.gen.frames
            )));
        }
        if self.data.n_source < 2 || self.data.n_target < 1 {
            return Err(Error::Config(
                "need at least 2 source and 1 target video".into(),
            ));
        }
        if self.eval.exemplars == 0 || self.eval.exemplars > self.data.n_source {
            return Err(Error::Config(format!(
                "exemplar count must lie in 1..={}, got {}",
                self.data.n_source, self.eval.exemplars
            )));
        }
        if self.train.target_shots > self.data.n_target {
            return Err(Error::Config(
                "more labeled target shots than target videos".into(),
            ));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
