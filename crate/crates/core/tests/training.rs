use std::collections::BTreeMap;

use coreda_core::inference::{predict_all, Predictor};
use coreda_core::losses::LossWeights;
use coreda_core::model::{
    init_params, load_checkpoint, save_checkpoint, Checkpoint, EncoderConfig, ModelConfig,
};
use coreda_core::synthdata::{gen_samples, Domain, DomainConfig, GenConfig, VideoSample};
use coreda_core::trainer::{choose_labeled_ids, sample_triplets, Trainer};
use coreda_core::{ClipSpec, Error, EvalReport, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::tempdir;

fn model_config() -> ModelConfig {
    ModelConfig::new(
        EncoderConfig {
            d: 6,
            hidden: 8,
            use_temporal_diff: true,
        },
        1,
        8,
        8,
        2,
    )
}

fn data(seed: u64) -> (Vec<VideoSample>, Vec<VideoSample>) {
    let gen = GenConfig {
        frames: 12,
        height: 8,
        width: 8,
        jitter_max: 1.5,
        ..GenConfig::default()
    };
    let s = gen_samples(
        6,
        Domain::Source,
        &DomainConfig::source_default(),
        &gen,
        seed,
    )
    .unwrap();
    let t = gen_samples(
        4,
        Domain::Target,
        &DomainConfig::target_default(),
        &gen,
        seed,
    )
    .unwrap();
    (s, t)
}

fn train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 2,
        batch_size: 3,
        clip: ClipSpec {
            segments: 2,
            clip_len: 2,
        },
        seed,
        ..TrainConfig::desk()
    }
}

/// Pearson chi-square statistic against a uniform expectation.
fn chi_square(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

#[test]
fn triplet_sources_are_uniform_and_never_their_own_exemplar() {
    let (s, t) = data(1);
    let refs: Vec<_> = t.iter().map(|x| x.unlabeled()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut src = vec![0usize; s.len()];
    let mut ex = vec![0usize; s.len()];
    for _ in 0..100 {
        let b = sample_triplets(
            &s,
            &refs,
            100,
            ClipSpec {
                segments: 2,
                clip_len: 2,
            },
            &mut rng,
        )
        .unwrap();
        for (a, e) in b.source_ids.iter().zip(&b.exemplar_ids) {
            assert_ne!(a, e);
            src[s.iter().position(|x| &x.id == a).unwrap()] += 1;
            ex[s.iter().position(|x| &x.id == e).unwrap()] += 1;
        }
    }
    // 5 degrees of freedom, 0.999 quantile 20.52
    assert!(chi_square(&src) < 20.52, "{src:?}");
    assert!(chi_square(&ex) < 20.52, "{ex:?}");
}

#[test]
fn disabled_target_branch_never_encodes_target_videos() {
    let (s, t) = data(2);
    let refs: Vec<_> = t.iter().map(|x| x.unlabeled()).collect();
    let cfg = TrainConfig {
        weights: LossWeights {
            gamma: 0.0,
            ..LossWeights::default()
        },
        ..train_config(2)
    };
    let (_, log) = Trainer::new(cfg, model_config())
        .train_coreda(&s, &refs)
        .unwrap();
    assert_eq!(log.target_forward_passes, 0);

    let (_, log) = Trainer::new(train_config(2), model_config())
        .train_coreda(&s, &refs)
        .unwrap();
    assert!(log.target_forward_passes > 0);
    assert_eq!(log.target_forward_passes, log.target_samples_consumed);
}

#[test]
fn source_only_touches_no_target_data() {
    let (s, _) = data(3);
    let (_, log) = Trainer::new(train_config(3), model_config())
        .train_source_only(&s)
        .unwrap();
    assert_eq!(log.target_forward_passes, 0);
    assert_eq!(log.target_samples_consumed, 0);
    assert_eq!(log.mode, "source-only");
}

#[test]
fn semi_supervision_without_shots_equals_unsupervised() {
    let (s, t) = data(4);
    let refs: Vec<_> = t.iter().map(|x| x.unlabeled()).collect();
    let cfg = TrainConfig {
        target_shots: 0,
        ..train_config(4)
    };
    let tr = Trainer::new(cfg, model_config());
    let (a, _) = tr.train_coreda(&s, &refs).unwrap();
    let (b, log) = tr
        .train_semisupervised(&s, &refs, &BTreeMap::new())
        .unwrap();
    assert_eq!(a.params(), b.params());
    assert_eq!(log.mode, "semi-sup");
}

#[test]
fn semi_supervision_validates_its_shots() {
    let (s, t) = data(5);
    let refs: Vec<_> = t.iter().map(|x| x.unlabeled()).collect();
    let tr = Trainer::new(
        TrainConfig {
            target_shots: 2,
            ..train_config(5)
        },
        model_config(),
    );

    let unknown = BTreeMap::from([("tgt-99999".to_string(), 10.0), (t[0].id.clone(), 12.0)]);
    assert!(matches!(
        tr.train_semisupervised(&s, &refs, &unknown),
        Err(Error::Contract(_))
    ));
    let short = BTreeMap::from([(t[0].id.clone(), 12.0)]);
    assert!(matches!(
        tr.train_semisupervised(&s, &refs, &short),
        Err(Error::Contract(_))
    ));

    let ids: Vec<&str> = t.iter().map(|x| x.id.as_str()).collect();
    let picked = choose_labeled_ids(&ids, 2, 5).unwrap();
    assert_eq!(picked, choose_labeled_ids(&ids, 2, 5).unwrap());
    let shots: BTreeMap<String, f64> = picked
        .iter()
        .map(|id| {
            (
                id.clone(),
                t.iter().find(|x| &x.id == id).unwrap().label.unwrap(),
            )
        })
        .collect();
    tr.train_semisupervised(&s, &refs, &shots).unwrap();
    assert!(choose_labeled_ids(&ids, 5, 5).is_err());
}

#[test]
fn diverging_run_names_the_offending_term() {
    let (s, t) = data(6);
    let refs: Vec<_> = t.iter().map(|x| x.unlabeled()).collect();
    let cfg = TrainConfig {
        epochs: 5,
        lr_encoder: 1e200,
        lr_heads: 1e200,
        ..train_config(6)
    };
    match Trainer::new(cfg, model_config()).train_coreda(&s, &refs) {
        Err(Error::NonFinite { term, value, .. }) => {
            assert!(
                [
                    "sup_rel",
                    "sup_abs",
                    "cons_s",
                    "cons_t",
                    "sup_extra",
                    "total"
                ]
                .contains(&term),
                "{term}"
            );
            assert!(!value.is_finite());
        }
        other => panic!("expected a non-finite loss, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn desk_loss_decreases() {
    let gen = GenConfig {
        frames: 16,
        ..GenConfig::default()
    };
    let s = gen_samples(64, Domain::Source, &DomainConfig::source_default(), &gen, 7).unwrap();
    let t = gen_samples(32, Domain::Target, &DomainConfig::target_default(), &gen, 7).unwrap();
    let refs: Vec<_> = t.iter().map(|x| x.unlabeled()).collect();
    let cfg = TrainConfig {
        epochs: 20,
        seed: 7,
        ..TrainConfig::desk()
    };
    let mc = ModelConfig::new(EncoderConfig::desk(), 1, 16, 16, cfg.clip.clip_len);
    let (_, log) = Trainer::new(cfg, mc).train_coreda(&s, &refs).unwrap();
    let first = log.epochs.first().unwrap().mean.total;
    let last = log.epochs.last().unwrap().mean.total;
    assert!(last < 0.5 * first, "first {first}, last {last}");
}

#[test]
fn source_only_ranks_clean_source_videos() {
    let gen = GenConfig::default();
    let clean = DomainConfig {
        noise_sigma: 0.0,
        ..DomainConfig::source_default()
    };
    let train = gen_samples(
        120,
        Domain::Source,
        &DomainConfig::source_default(),
        &gen,
        8,
    )
    .unwrap();
    let held = gen_samples(40, Domain::Source, &clean, &gen, 80).unwrap();
    let cfg = TrainConfig {
        seed: 8,
        ..TrainConfig::desk()
    };
    let mc = ModelConfig::new(EncoderConfig::desk(), 1, 16, 16, cfg.clip.clip_len);
    let (model, _) = Trainer::new(cfg.clone(), mc)
        .train_source_only(&train)
        .unwrap();
    let rows: Vec<_> = held
        .iter()
        .map(|x| (x.id.as_str(), &x.video, x.label))
        .collect();
    let preds = predict_all(
        &model,
        &rows,
        None,
        Predictor::Absolute,
        cfg.clip.clip_len,
        1,
    )
    .unwrap();
    let report = EvalReport::from_rows(&preds).unwrap();
    assert!(report.scc.value >= 0.8, "{report:?}");
}

#[test]
fn checkpoint_for_another_width_is_refused() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let model = init_params(model_config(), 1).unwrap();
    save_checkpoint(
        &Checkpoint {
            model,
            optimizer: None,
            epoch: 0,
            meta: serde_json::Value::Null,
        },
        &path,
    )
    .unwrap();
    let wider = ModelConfig::new(
        EncoderConfig {
            d: 7,
            ..model_config().encoder
        },
        1,
        8,
        8,
        2,
    );
    assert!(matches!(
        load_checkpoint(&path, Some(&wider)),
        Err(Error::ConfigConflict(_))
    ));
    assert!(load_checkpoint(&path, Some(&model_config())).is_ok());
}

#[test]
fn clip_length_mismatch_is_a_conflict() {
    let (s, t) = data(9);
    let refs: Vec<_> = t.iter().map(|x| x.unlabeled()).collect();
    let cfg = TrainConfig {
        clip: ClipSpec {
            segments: 2,
            clip_len: 3,
        },
        ..train_config(9)
    };
    let tr = Trainer::new(cfg, model_config());
    assert!(matches!(
        tr.train_coreda(&s, &refs),
        Err(Error::ConfigConflict(_))
    ));
    assert!(matches!(
        tr.train_source_only(&s),
        Err(Error::ConfigConflict(_))
    ));
}

#[test]
fn same_seed_reproduces_parameters() {
    let (s, t) = data(10);
    let refs: Vec<_> = t.iter().map(|x| x.unlabeled()).collect();
    let tr = Trainer::new(train_config(10), model_config());
    let (a, la) = tr.train_coreda(&s, &refs).unwrap();
    let (b, lb) = tr.train_coreda(&s, &refs).unwrap();
    assert_eq!(a.params(), b.params());
    assert_eq!(
        la.epochs.last().unwrap().mean,
        lb.epochs.last().unwrap().mean
    );
    let (c, _) = Trainer::new(train_config(11), model_config())
        .train_coreda(&s, &refs)
        .unwrap();
    assert_ne!(a.params(), c.params());
}
