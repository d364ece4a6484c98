use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nmvp_bench::Workload;
use nmvp_core::{gen_rand_hist, DistanceSpec, PrunerSpec, SearchMode, TransformSpec, VpTree};
use std::hint::black_box;

fn distances(c: &mut Criterion) {
    let pts = gen_rand_hist(2, 8, 1, 1e-6).unwrap();
    let (x, y) = (pts.point(0), pts.point(1));
    let mut group = c.benchmark_group("distance");
    for name in ["l2", "kldiv", "itakurasaito", "renyi:alpha=0.25"] {
        let spec: DistanceSpec = name.parse().unwrap();
        group.bench_function(name, |b| {
            b.iter(|| spec.eval_unchecked(black_box(x), black_box(y)))
        });
    }
    group.finish();
}

fn build(c: &mut Criterion) {
    let w = Workload::rand_hist(20_000, 8, 1);
    c.bench_function("build/kldiv/20k", |b| {
        b.iter(|| {
            VpTree::build(
                &w.data,
                DistanceSpec::KlDiv,
                SearchMode::Plain(TransformSpec::identity()),
                50,
                0,
            )
            .unwrap()
        })
    });
}

fn knn(c: &mut Criterion) {
    let w = Workload::rand_hist(20_000, 8, 100);
    let spec = DistanceSpec::KlDiv;
    let trigen = w.trigen_transform(&spec);
    let cases = [
        (
            "plain-metric",
            SearchMode::Plain(TransformSpec::identity()),
            PrunerSpec::Metric,
        ),
        (
            "plain-piecewise",
            SearchMode::Plain(TransformSpec::identity()),
            PrunerSpec::piecewise(0.25, 0.25, 1).unwrap(),
        ),
        (
            "trigen0",
            SearchMode::from_name("trigen0", trigen).unwrap(),
            PrunerSpec::Metric,
        ),
        (
            "trigen1",
            SearchMode::from_name("trigen1", trigen).unwrap(),
            PrunerSpec::Metric,
        ),
    ];
    let mut group = c.benchmark_group("knn/kldiv/20k");
    group.sample_size(10);
    for (label, mode, pruner) in cases {
        let index = VpTree::build(&w.data, spec, mode, 50, 0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(label), &pruner, |b, pruner| {
            b.iter(|| {
                for q in w.queries.iter() {
                    black_box(index.knn_search(q, 10, pruner).unwrap());
                }
            })
        });
    }
    group.finish();
}

criterion_group!(benches, distances, build, knn);
criterion_main!(benches);
