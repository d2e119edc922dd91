use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use listcolour::verifier::canonical_assignments;
use listcolour::{
    brute_force_decide, build_b, decide, max_deficiency_set, max_matching, three_phase, GreedyMode,
    PartStructure,
};
use listcolour_bench::{k33_bad, seven_vertex, thirteen_vertex};

fn solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("decide");
    for (name, inst) in [
        ("k33_bad", k33_bad()),
        ("seven_vertex", seven_vertex()),
        ("thirteen_vertex", thirteen_vertex()),
    ] {
        g.bench_function(name, |b| b.iter(|| decide(black_box(&inst))));
    }
    let inst = seven_vertex();
    g.bench_function("brute_force_seven_vertex", |b| {
        b.iter(|| brute_force_decide(black_box(&inst), u128::MAX))
    });
    g.finish();
}

fn matching(c: &mut Criterion) {
    let inst = thirteen_vertex();
    let graph = build_b(&inst);
    let mut g = c.benchmark_group("matching");
    g.bench_function("max_matching", |b| {
        b.iter(|| max_matching(black_box(&graph)))
    });
    g.bench_function("max_deficiency_set", |b| {
        b.iter(|| max_deficiency_set(black_box(&graph)))
    });
    g.finish();
}

fn enumeration(c: &mut Criterion) {
    let mut g = c.benchmark_group("canonical_assignments");
    g.sample_size(10);
    for sizes in [vec![2, 3], vec![1, 4], vec![2, 2, 2]] {
        let ps = PartStructure::new(sizes.clone()).unwrap();
        let k = ps.k();
        g.bench_function(format!("{sizes:?}"), |b| {
            b.iter(|| {
                canonical_assignments(black_box(&ps), k, 2 * k)
                    .unwrap()
                    .len()
            })
        });
    }
    g.finish();
}

fn greedy(c: &mut Criterion) {
    let inst = seven_vertex();
    c.bench_function("three_phase_seven_vertex", |b| {
        b.iter(|| three_phase(black_box(&inst), GreedyMode::Strict).unwrap())
    });
}

criterion_group!(benches, solver, matching, enumeration, greedy);
criterion_main!(benches);
