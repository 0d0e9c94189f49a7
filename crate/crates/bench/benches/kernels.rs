use coreda_bench::{desk_fixture, random_matrix};
use coreda_core::inference::{encode_video, exemplar_rng, predict_target, select_exemplars};
use coreda_core::model::OptimizerState;
use coreda_core::trainer::{apply_step, build_step_graph};
use coreda_core::Graph;
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    for n in [32usize, 128, 512] {
        let (a, b) = (random_matrix(n, 64, 1), random_matrix(64, 32, 2));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| {
                let mut g = Graph::new();
                let (va, vb) = (g.param(a.clone()), g.param(b.clone()));
                let y = g.matmul(va, vb).unwrap();
                let s = g.sum(y);
                g.backward(s).unwrap();
                black_box(g.grad(va))
            })
        });
    }
    group.finish();
}

fn encode(c: &mut Criterion) {
    let fx = desk_fixture(3);
    let l = fx.cfg.train.clip.clip_len;
    c.bench_function("encode_video", |b| {
        b.iter(|| encode_video(&fx.model, black_box(&fx.source[0].video), l).unwrap())
    });
    let ex = select_exemplars(&fx.source, fx.cfg.eval.exemplars, &mut exemplar_rng(3)).unwrap();
    c.bench_function("predict_target_mixed", |b| {
        b.iter(|| {
            predict_target(
                &fx.model,
                black_box(&fx.target[0].video),
                &ex,
                fx.cfg.mix(),
                l,
            )
            .unwrap()
        })
    });
}

fn train_step(c: &mut Criterion) {
    let fx = desk_fixture(4);
    c.bench_function("train_step", |b| {
        b.iter_batched(
            || (fx.model.clone(), OptimizerState::new(&fx.model)),
            |(mut model, mut opt)| {
                let mut sg = build_step_graph(&model, &fx.batch, None, &fx.cfg.train).unwrap();
                apply_step(&mut model, &mut opt, &mut sg, &fx.cfg.train).unwrap();
                model
            },
            criterion::BatchSize::SmallInput,
        )
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = matmul, encode, train_step
}
criterion_main!(benches);
