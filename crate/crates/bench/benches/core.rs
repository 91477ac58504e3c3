use cfkmer_core::kmer::{kmer_count_vector, transition_counts};
use cfkmer_core::phylo::paper::TRIPLE_POINTS;
use cfkmer_core::tv::{exact_tv, StatQuery, DEFAULT_CAP_BITS};
use cfkmer_core::{build_paper_trees, simulate_marked, Backend, ExcursionSource, PaperTreeParams, SimulationConfig, Statistic};
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};

fn simulation(c: &mut Criterion) {
    let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
    let m = 1 << 20;
    let mut g = c.benchmark_group("simulate");
    g.throughput(Throughput::Elements(m as u64));
    g.bench_function("triple 2^20 sites", |b| {
        b.iter(|| simulate_marked(&pair.t1, &TRIPLE_POINTS, &SimulationConfig::new(1.0, m, 1)).unwrap())
    });
    g.finish();
}

fn counting(c: &mut Criterion) {
    let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
    let seq = simulate_marked(&pair.t1, &["A"], &SimulationConfig::new(1.0, 1 << 20, 2)).unwrap().remove(0);
    let mut g = c.benchmark_group("kmer");
    g.throughput(Throughput::Elements(seq.len() as u64));
    for k in [1, 4, 8] {
        g.bench_function(format!("counts k={k}"), |b| b.iter(|| kmer_count_vector(black_box(&seq), k).unwrap()));
        g.bench_function(format!("transitions k={k}"), |b| b.iter(|| transition_counts(black_box(&seq), k).unwrap()));
    }
    g.finish();
}

fn enumeration(c: &mut Criterion) {
    let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
    let mut g = c.benchmark_group("exact tv");
    g.sample_size(10);
    for backend in [Backend::Float, Backend::Rational] {
        g.bench_function(format!("counts m=5 {backend:?}"), |b| {
            b.iter(|| {
                let q = StatQuery::new(Statistic::Counts, 5, 1);
                exact_tv(&pair.t1, &pair.t2, &TRIPLE_POINTS, q, 1.0, backend, DEFAULT_CAP_BITS).unwrap()
            })
        });
    }
    g.finish();
}

fn excursions(c: &mut Criterion) {
    let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
    let src = ExcursionSource::for_tree(&pair.t1, 1, 1.0).unwrap();
    let n = 100_000;
    let mut g = c.benchmark_group("excursions");
    g.throughput(Throughput::Elements(n));
    g.bench_function("stream k=1", |b| {
        b.iter(|| {
            let mut s = src.stream(7, 1);
            let mut buf = vec![0u32; src.dimension()];
            (0..n).map(|_| s.next_into(&mut buf).unwrap() as u64).sum::<u64>()
        })
    });
    g.finish();
}

criterion_group!(benches, simulation, counting, enumeration, excursions);
criterion_main!(benches);
