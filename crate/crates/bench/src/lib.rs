//! Fixtures shared by the benchmarks under `benches/`.

use coreda_core::synthdata::{gen_samples, VideoSample};
use coreda_core::trainer::{sample_triplets, TripletBatch};
use coreda_core::{init_params, Domain, Model, Profile, RunConfig, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .expect("sizes agree")
}

/// Desk-profile model, data and one sampled batch.
pub struct DeskFixture {
    pub cfg: RunConfig,
    pub model: Model,
    pub source: Vec<VideoSample>,
    pub target: Vec<VideoSample>,
    pub batch: TripletBatch,
}

pub fn desk_fixture(seed: u64) -> DeskFixture {
    let mut cfg = RunConfig::profile(Profile::Desk);
    cfg.set_seed(seed);
    let source = gen_samples(24, Domain::Source, &cfg.source_domain, &cfg.gen, seed)
        .expect("valid desk config");
    let target = gen_samples(12, Domain::Target, &cfg.target_domain, &cfg.gen, seed)
        .expect("valid desk config");
    let refs: Vec<_> = target.iter().map(|t| t.unlabeled()).collect();
    let batch = sample_triplets(
        &source,
        &refs,
        cfg.train.batch_size,
        cfg.train.clip,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
    .expect("enough videos");
    let model = init_params(cfg.model_config(), seed).expect("valid desk model");
    DeskFixture {
        cfg,
        model,
        source,
        target,
        batch,
    }
}
