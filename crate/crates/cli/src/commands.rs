use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use coreda_core::gradcheck::{run_gradcheck, GradcheckOptions};
use coreda_core::inference::{exemplar_rng, predict_all, select_exemplars, MixConfig, Predictor};
use coreda_core::metrics::write_prediction_rows;
use coreda_core::synthdata::{
    dataset_paths, gen_dataset, load_dataset, read_sealed_labels, write_sealed_labels,
};
use coreda_core::trainer::choose_labeled_ids;
use coreda_core::{load_checkpoint, Dataset, Domain, EvalReport, RunConfig, TrainMode, Trainer};
use log::info;

use crate::{
    EvalArgs, GlobalArgs, GradcheckArgs, NumericFailure, PredictorArg, SplitArg, TrainArgs,
};

const SOURCE: &str = "source";
const TARGET: &str = "target";
const SEALED_LABELS: &str = "target.labels.json";
const CHECKPOINT: &str = "model.ckpt";
const SHOTS: &str = "shots.json";

fn load_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(g.profile.into(), g.config.as_deref())?;
    if let Some(seed) = g.seed {
        cfg.set_seed(seed);
    }
    if let Some(d) = &g.data_dir {
        cfg.paths.data_dir = d.clone();
    }
    if let Some(d) = &g.run_dir {
        cfg.paths.run_dir = d.clone();
    }
    Ok(cfg)
}

fn load_split(cfg: &RunConfig, stem: &str) -> Result<Dataset> {
    let manifest = dataset_paths(&cfg.paths.data_dir, stem).0;
    let ds = load_dataset(&manifest)
        .with_context(|| format!("cannot load the {stem} set; run `coreda gen` first"))?;
    if ds.gen.dims() != cfg.gen.dims() {
        return Err(coreda_core::Error::ConfigConflict(format!(
            "{} holds videos of {:?}, the config describes {:?}",
            manifest.display(),
            ds.gen.dims(),
            cfg.gen.dims()
        ))
        .into());
    }
    Ok(ds)
}

fn sealed_labels(cfg: &RunConfig) -> Result<BTreeMap<String, f64>> {
    let path = cfg.paths.data_dir.join(SEALED_LABELS);
    read_sealed_labels(&path).context("cannot read the sealed target labels")
}

pub fn gen(g: &GlobalArgs) -> Result<()> {
    let cfg = load_config(g)?;
    let dir = &cfg.paths.data_dir;
    gen_dataset(
        cfg.data.n_source,
        true,
        Domain::Source,
        &cfg.source_domain,
        &cfg.gen,
        cfg.seed,
        dir,
        SOURCE,
    )?;
    let (_, withheld) = gen_dataset(
        cfg.data.n_target,
        false,
        Domain::Target,
        &cfg.target_domain,
        &cfg.gen,
        cfg.seed,
        dir,
        TARGET,
    )?;
    write_sealed_labels(&dir.join(SEALED_LABELS), &withheld)?;
    println!(
        "wrote {} source and {} target videos ({} frames of {}x{}) to {}",
        cfg.data.n_source,
        cfg.data.n_target,
        cfg.gen.frames,
        cfg.gen.height,
        cfg.gen.width,
        dir.display()
    );
    Ok(())
}

pub fn train(g: &GlobalArgs, a: &TrainArgs) -> Result<()> {
    let mut cfg = load_config(g)?;
    let mode: TrainMode = a.mode.into();
    let ab = &mut cfg.train.ablation;
    ab.disable_sup_rel |= a.no_sup_rel;
    ab.disable_sup_abs |= a.no_sup_abs;
    ab.disable_cons_s |= a.no_cons_s;
    ab.disable_cons_t |= a.no_cons_t;
    ab.disable_stopgrad |= a.no_stopgrad;
    cfg.validate()?;

    let out = a
        .out
        .clone()
        .unwrap_or_else(|| cfg.paths.run_dir.join(mode.name()));
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let ckpt = out.join(CHECKPOINT);
    let mut trainer = Trainer::new(cfg.train.clone(), cfg.model_config());
    trainer.checkpoint_path = Some(ckpt.clone());

    let source = load_split(&cfg, SOURCE)?;
    info!(
        "training {} on {} source videos",
        mode.name(),
        source.samples.len()
    );
    let (_, log) = match mode {
        TrainMode::SourceOnly => {
            if a.resume {
                bail!("--resume is only supported for coreda training");
            }
            trainer.train_source_only(&source.samples)?
        }
        TrainMode::Coreda => {
            let target = load_split(&cfg, TARGET)?;
            let refs = target.unlabeled();
            if a.resume {
                let ck = load_checkpoint(&ckpt, Some(&cfg.model_config()))
                    .with_context(|| format!("cannot resume from {}", ckpt.display()))?;
                info!("resuming after epoch {}", ck.epoch);
                trainer.resume_coreda(ck, &source.samples, &refs)?
            } else {
                trainer.train_coreda(&source.samples, &refs)?
            }
        }
        TrainMode::SemiSup => {
            if a.resume {
                bail!("--resume is only supported for coreda training");
            }
            let target = load_split(&cfg, TARGET)?;
            let refs = target.unlabeled();
            let labels = sealed_labels(&cfg)?;
            let ids: Vec<&str> = refs.iter().map(|r| r.id).collect();
            let picked = choose_labeled_ids(&ids, cfg.train.target_shots, cfg.seed)?;
            let shots = picked
                .iter()
                .map(|id| {
                    labels
                        .get(id)
                        .map(|&y| (id.clone(), y))
                        .with_context(|| format!("no sealed label for {id}"))
                })
                .collect::<Result<BTreeMap<_, _>>>()?;
            fs::write(out.join(SHOTS), serde_json::to_string_pretty(&picked)?)?;
            trainer.train_semisupervised(&source.samples, &refs, &shots)?
        }
    };

    log.write_jsonl(&out.join("train_log.jsonl"))?;
    fs::write(out.join("config.toml"), cfg.to_toml_string())?;
    let last = log.epochs.last().map_or(f64::NAN, |e| e.mean.total);
    println!(
        "{} trained for {} epochs, final mean loss {last:.4}; checkpoint {}",
        mode.name(),
        log.epochs.len(),
        ckpt.display()
    );
    Ok(())
}

fn labeled_shots(run: &Path) -> Result<BTreeSet<String>> {
    let path = run.join(SHOTS);
    if !path.exists() {
        return Ok(BTreeSet::new());
    }
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))
}

pub fn eval(g: &GlobalArgs, a: &EvalArgs) -> Result<()> {
    let mut cfg = load_config(g)?;
    if let Some(m) = a.exemplars {
        cfg.eval.exemplars = m;
    }
    if let Some(l) = a.lambda {
        cfg.eval.mix = MixConfig { lambda: l };
    }
    if a.no_bg_mix {
        cfg.eval.background_mixing = false;
    }
    if let Some(w) = a.workers {
        cfg.eval.workers = w;
    }
    cfg.validate()?;

    let run = a
        .run
        .clone()
        .unwrap_or_else(|| cfg.paths.run_dir.join(TrainMode::Coreda.name()));
    let ckpt = run.join(CHECKPOINT);
    let ck = load_checkpoint(&ckpt, Some(&cfg.model_config()))
        .with_context(|| format!("cannot use checkpoint {}", ckpt.display()))?;
    let trained_as = ck
        .meta
        .get("mode")
        .and_then(|m| m.as_str())
        .unwrap_or("coreda")
        .to_string();
    let predictor = match a.predictor {
        Some(PredictorArg::Absolute) => Predictor::Absolute,
        Some(PredictorArg::Exemplar) => Predictor::Exemplar { mix: cfg.mix() },
        None if trained_as == TrainMode::SourceOnly.name() => Predictor::Absolute,
        None => Predictor::Exemplar { mix: cfg.mix() },
    };

    let source = load_split(&cfg, SOURCE)?;
    let target;
    let (eval_set, labels, skip) = match a.split {
        SplitArg::Target => {
            target = load_split(&cfg, TARGET)?;
            (&target, sealed_labels(&cfg)?, labeled_shots(&run)?)
        }
        SplitArg::Source => (&source, BTreeMap::new(), BTreeSet::new()),
    };
    let rows: Vec<_> = eval_set
        .samples
        .iter()
        .filter(|s| !skip.contains(&s.id))
        .map(|s| {
            (
                s.id.as_str(),
                &s.video,
                s.label.or_else(|| labels.get(&s.id).copied()),
            )
        })
        .collect();
    let exemplars = match predictor {
        Predictor::Exemplar { .. } => Some(select_exemplars(
            &source.samples,
            cfg.eval.exemplars,
            &mut exemplar_rng(cfg.seed),
        )?),
        Predictor::Absolute => None,
    };
    let preds = predict_all(
        &ck.model,
        &rows,
        exemplars.as_ref(),
        predictor,
        cfg.train.clip.clip_len,
        cfg.eval.workers,
    )?;
    let report = EvalReport::from_rows(&preds)?;

    let split = match a.split {
        SplitArg::Target => "target",
        SplitArg::Source => "source",
    };
    let report_path = run.join(format!("eval_{split}.json"));
    report.write_json(&report_path)?;
    write_prediction_rows(&preds, &run.join(format!("eval_{split}.tsv")))?;
    if !skip.is_empty() {
        info!("left out {} labeled target shots", skip.len());
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

pub fn gradcheck(g: &GlobalArgs, a: &GradcheckArgs) -> Result<()> {
    let seed = g.seed.unwrap_or(0);
    let report = run_gradcheck(&GradcheckOptions {
        seed,
        corrupt: a.corrupt.clone(),
    })?;
    println!("{report}");
    if let Some(path) = &a.json {
        fs::write(path, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    if !report.passed() {
        let worst = report
            .cases
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect::<Vec<_>>();
        return Err(
            NumericFailure(format!("gradient check failed for {}", worst.join(", "))).into(),
        );
    }
    Ok(())
}
