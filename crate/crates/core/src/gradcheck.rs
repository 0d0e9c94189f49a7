//! Central finite-difference checks of every differentiable op and of a full
//! composed training step.
//!
//! Values blocked by `detach` are replayed from the unperturbed forward pass,
//! so the numeric derivative is taken of the same surrogate objective whose
//! gradient backward computes.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{init_params, EncoderConfig, Model, ModelConfig};
use crate::numkernel::{Graph, Tensor, Var};
use crate::sampling::ClipSpec;
use crate::synthdata::{gen_samples, Domain, DomainConfig, GenConfig};
use crate::trainer::{build_step_graph_on, sample_triplets, Ablation, LabeledBatch, TrainConfig};

pub const FD_STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-5;

#[derive(Clone, Debug, Default)]
pub struct GradcheckOptions {
    pub seed: u64,
    /// Name of a case whose analytic gradient is deliberately scaled by 1.01;
    /// used as a negative control.
    pub corrupt: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
    pub cases: Vec<CaseResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn case(&self, name: &str) -> Option<&CaseResult> {
        self.cases.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "gradcheck seed={} h={:e} limit={:e}",
            self.seed, self.step, self.tolerance
        )?;
        for c in &self.cases {
            let verdict = if c.passed { "ok" } else { "FAIL" };
            writeln!(
                f,
                "{:<24} {:>6} entries  max rel err {:.3e}  {verdict}",
                c.name, c.checked, c.max_rel_error
            )?;
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Relative error with a floor that keeps round-off in near-zero components
/// from dominating.
pub fn relative_error(analytic: f64, numeric: f64, loss: f64) -> f64 {
    let floor = 1e-4 * loss.abs().max(1.0);
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// A rebuildable scalar objective: inputs and detached replay values in,
/// `(tape, root, input vars)` out.
type Objective<'a> = dyn Fn(&[Tensor], Vec<Tensor>) -> Result<(Graph, Var, Vec<Var>)> + 'a;

/// Compares backward against central differences for every input entry.
pub fn check_objective(
    name: &str,
    inputs: &[Tensor],
    f: &Objective<'_>,
    corrupt: bool,
) -> Result<CaseResult> {
    let (mut g, root, vars) = f(inputs, Vec::new())?;
    let replay = g.detached_values().to_vec();
    let loss = g.value(root).item();
    g.backward(root)?;
    let factor = if corrupt { 1.01 } else { 1.0 };
    let analytic: Vec<Tensor> = vars
        .iter()
        .map(|&v| {
            g.grad(v)
                .unwrap_or_else(|| Tensor::zeros(g.value(v).shape()))
                .map(|x| x * factor)
        })
        .collect();

    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut probe = inputs.to_vec();
    for (t, grad) in analytic.iter().enumerate() {
        for i in 0..inputs[t].numel() {
            let x0 = inputs[t].data()[i];
            probe[t].data_mut()[i] = x0 + FD_STEP;
            let (gp, rp, _) = f(&probe, replay.clone())?;
            probe[t].data_mut()[i] = x0 - FD_STEP;
            let (gm, rm, _) = f(&probe, replay.clone())?;
            probe[t].data_mut()[i] = x0;
            let numeric = (gp.value(rp).item() - gm.value(rm).item()) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(grad.data()[i], numeric, loss));
            checked += 1;
        }
    }
    Ok(CaseResult {
        name: name.to_string(),
        checked,
        max_rel_error: worst,
        passed: worst <= TOLERANCE,
    })
}

fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| StandardNormal.sample(rng)).collect(),
    )
    .expect("shape matches")
}

/// Reduces a non-scalar output to a scalar with fixed random weights.
fn project(g: &mut Graph, out: Var, seed: u64) -> Result<Var> {
    if g.value(out).is_scalar() {
        return Ok(out);
    }
    let w = randn(&mut ChaCha8Rng::seed_from_u64(seed), g.value(out).shape());
    let w = g.constant(w);
    let p = g.mul(out, w)?;
    Ok(g.sum(p))
}

type OpFn = fn(&mut Graph, &[Var]) -> Result<Var>;

fn op_cases() -> Vec<(&'static str, Vec<Vec<usize>>, OpFn)> {
    vec![
        ("matmul", vec![vec![3, 4], vec![4, 2]], |g, v| {
            g.matmul(v[0], v[1])
        }),
        ("add_row", vec![vec![3, 4], vec![4]], |g, v| {
            g.add_row(v[0], v[1])
        }),
        ("add", vec![vec![3, 4], vec![3, 4]], |g, v| {
            g.add(v[0], v[1])
        }),
        ("sub", vec![vec![3, 4], vec![3, 4]], |g, v| {
            g.sub(v[0], v[1])
        }),
        ("mul", vec![vec![3, 4], vec![3, 4]], |g, v| {
            g.mul(v[0], v[1])
        }),
        ("affine", vec![vec![3, 4]], |g, v| {
            Ok(g.affine(v[0], 1.7, -0.3))
        }),
        ("scale", vec![vec![5]], |g, v| Ok(g.scale(v[0], -2.5))),
        ("silu", vec![vec![3, 4]], |g, v| Ok(g.silu(v[0]))),
        ("group_mean_rows", vec![vec![6, 3]], |g, v| {
            g.group_mean_rows(v[0], 2)
        }),
        ("gap_temporal", vec![vec![4, 3]], |g, v| {
            g.gap_temporal(v[0])
        }),
        ("concat_vec", vec![vec![3], vec![3]], |g, v| {
            g.concat_vec(v[0], v[1])
        }),
        ("concat_cols", vec![vec![3, 2], vec![3, 4]], |g, v| {
            g.concat_cols(v[0], v[1])
        }),
        ("reshape", vec![vec![2, 6]], |g, v| g.reshape(v[0], &[3, 4])),
        ("sum", vec![vec![3, 4]], |g, v| Ok(g.sum(v[0]))),
        ("mse", vec![vec![5], vec![5]], |g, v| g.mse(v[0], v[1])),
        ("weighted_sum", vec![vec![], vec![], vec![]], |g, v| {
            g.weighted_sum(&[(0.5, v[0]), (-1.2, v[1]), (2.0, v[2])])
        }),
        ("detach", vec![vec![3, 4]], |g, v| {
            let s = g.silu(v[0]);
            let d = g.detach(s);
            g.mul(v[0], d)
        }),
    ]
}

fn tiny_setup(seed: u64) -> Result<(Model, crate::trainer::TripletBatch, TrainConfig)> {
    let gen = GenConfig {
        frames: 8,
        height: 8,
        width: 8,
        jitter_max: 1.5,
        seed,
        ..GenConfig::default()
    };
    let source = gen_samples(
        4,
        Domain::Source,
        &DomainConfig::source_default(),
        &gen,
        seed,
    )?;
    let target = gen_samples(
        3,
        Domain::Target,
        &DomainConfig::target_default(),
        &gen,
        seed,
    )?;
    let clip = ClipSpec {
        segments: 2,
        clip_len: 2,
    };
    let cfg = TrainConfig {
        batch_size: 3,
        clip,
        seed,
        ..TrainConfig::desk()
    };
    let refs: Vec<_> = target.iter().map(|t| t.unlabeled()).collect();
    let batch = sample_triplets(
        &source,
        &refs,
        cfg.batch_size,
        clip,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )?;
    let mc = ModelConfig::new(
        EncoderConfig {
            d: 4,
            hidden: 6,
            use_temporal_diff: true,
        },
        1,
        8,
        8,
        clip.clip_len,
    );
    Ok((init_params(mc, seed)?, batch, cfg))
}

fn step_case(
    name: &str,
    model: &Model,
    batch: &crate::trainer::TripletBatch,
    labeled: Option<&LabeledBatch>,
    cfg: &TrainConfig,
    corrupt: bool,
) -> Result<CaseResult> {
    let f = |params: &[Tensor], replay: Vec<Tensor>| {
        let m = Model::from_params(model.config, params.to_vec())?;
        let step =
            build_step_graph_on(Graph::with_detached_replay(replay), &m, batch, labeled, cfg)?;
        Ok((step.graph, step.total, step.bound.vars))
    };
    check_objective(name, model.params(), &f, corrupt)
}

/// Runs every case and collects the per-case maximum relative error.
pub fn run_gradcheck(opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let is_corrupt = |n: &str| opts.corrupt.as_deref() == Some(n);
    let mut cases = Vec::new();
    for (k, (name, shapes, op)) in op_cases().into_iter().enumerate() {
        let inputs: Vec<Tensor> = shapes.iter().map(|s| randn(&mut rng, s)).collect();
        let proj_seed = opts.seed ^ (k as u64 + 1);
        let f = |xs: &[Tensor], replay: Vec<Tensor>| {
            let mut g = Graph::with_detached_replay(replay);
            let vars: Vec<Var> = xs.iter().map(|x| g.param(x.clone())).collect();
            let out = op(&mut g, &vars)?;
            let root = project(&mut g, out, proj_seed)?;
            Ok((g, root, vars))
        };
        cases.push(check_objective(name, &inputs, &f, is_corrupt(name))?);
    }

    let (model, batch, cfg) = tiny_setup(opts.seed)?;
    cases.push(step_case(
        "train_step",
        &model,
        &batch,
        None,
        &cfg,
        is_corrupt("train_step"),
    )?);
    let open = TrainConfig {
        ablation: Ablation {
            disable_stopgrad: true,
            ..Ablation::default()
        },
        ..cfg.clone()
    };
    cases.push(step_case(
        "train_step_no_stopgrad",
        &model,
        &batch,
        None,
        &open,
        is_corrupt("train_step_no_stopgrad"),
    )?);
    let labeled = LabeledBatch {
        clips: batch.target.clone(),
        labels: vec![9.0, 17.5, 26.0],
    };
    let semi = TrainConfig {
        ablation: Ablation {
            also_supervise_source_abs: true,
            ..Ablation::default()
        },
        ..cfg
    };
    cases.push(step_case(
        "train_step_semisup",
        &model,
        &batch,
        Some(&labeled),
        &semi,
        is_corrupt("train_step_semisup"),
    )?);

    Ok(GradcheckReport {
        seed: opts.seed,
        step: FD_STEP,
        tolerance: TOLERANCE,
        cases,
    })
}
