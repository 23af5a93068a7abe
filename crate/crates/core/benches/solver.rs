use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use firmcr::analysis::{competitive_ratio, AnalysisOptions, ConstraintSet, SchedulerSpec};
use firmcr::clairvoyant::build_clairvoyant_lts;
use firmcr::graph::{min_mean_cycle, MultiGraph};
use firmcr::lts::DEFAULT_STATE_CAP;
use firmcr::schedulers::BuiltinPolicy;
use firmcr::{Exec, Taskset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn pipeline(c: &mut Criterion) {
    let ts = Taskset::from_triples(&[(1, 2, 3), (2, 3, 2), (1, 6, 1)]).unwrap();
    let mut g = c.benchmark_group("edf-a4");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = AnalysisOptions {
            exec,
            ..AnalysisOptions::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                competitive_ratio(
                    &ts,
                    &SchedulerSpec::Builtin(BuiltinPolicy::Edf),
                    &ConstraintSet::default(),
                    &opts,
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn clairvoyant(c: &mut Criterion) {
    let ts = Taskset::from_triples(&[(2, 9, 1), (3, 10, 2), (1, 8, 1), (4, 10, 3)]).unwrap();
    let mut g = c.benchmark_group("clairvoyant-d10");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_clairvoyant_lts(&ts, DEFAULT_STATE_CAP, exec).unwrap())
        });
    }
    g.finish();
}

fn karp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 2000;
    // A ring keeps the graph strongly connected.
    let mut edges: Vec<(u32, u32)> = (0..n).map(|v| (v, (v + 1) % n)).collect();
    edges.extend((0..4 * n).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))));
    let w: Vec<i64> = edges.iter().map(|_| rng.gen_range(-50..=50)).collect();
    let graph = MultiGraph::new(n as usize, &edges);
    let nodes: Vec<u32> = (0..n).collect();
    let mut g = c.benchmark_group("karp-2000");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| min_mean_cycle(&graph, &nodes, &w, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, pipeline, clairvoyant, karp);
criterion_main!(benches);
