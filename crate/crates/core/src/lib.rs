//! Contrastive-regression domain adaptation for video score regression.
//!
//! The crate bundles a small reverse-mode autodiff engine, a synthetic
//! two-domain video benchmark, the encoder with absolute and relative score
//! heads, the adaptation trainer, exemplar-based target inference and the
//! evaluation metrics.

mod error;

pub mod config;
pub mod gradcheck;
pub mod inference;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod numkernel;
pub mod sampling;
pub mod synthdata;
pub mod trainer;

pub use config::{Profile, RunConfig};
pub use error::{Error, Result};
pub use inference::{predict_target, select_exemplars, ExemplarSet, MixConfig, PredictionRow};
pub use losses::{LossWeights, StepLosses};
pub use metrics::{EvalReport, MetricValue};
pub use model::{
    init_params, load_checkpoint, save_checkpoint, Checkpoint, EncoderConfig, Model, ModelConfig,
};
pub use numkernel::{Graph, Tensor, Var};
pub use sampling::ClipSpec;
pub use synthdata::{Dataset, Domain, DomainConfig, GenConfig, Video, VideoSample};
pub use trainer::{Ablation, TrainConfig, TrainLog, TrainMode, Trainer};
