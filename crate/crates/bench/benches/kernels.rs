use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gwlimits_bench::{binary, complete_binary, heavy};
use gwlimits_core::projection::project_ta;
use gwlimits_core::sampler::{sample_gw_with, DiscreteSampler};
use gwlimits_core::walk::walk_pmf;
use gwlimits_core::{DegreeSet, LaWalk, SampleConfig, TPlusEvent};

fn walk_powering(c: &mut Criterion) {
    let mut group = c.benchmark_group("walk_pmf");
    let exact = binary().pmf_prefix(3);
    let float = heavy().pmf_prefix(2049);
    for n in [64usize, 256] {
        group.bench_with_input(BenchmarkId::new("exact", n), &n, |b, &n| b.iter(|| walk_pmf(&exact, n, n)));
    }
    for n in [256usize, 2048] {
        group.bench_with_input(BenchmarkId::new("float", n), &n, |b, &n| b.iter(|| walk_pmf(&float, n, n)));
    }
    group.finish();
}

fn conditional(c: &mut Criterion) {
    let ev: TPlusEvent = "(()())|1|0".parse().unwrap();
    let mut group = c.benchmark_group("conditional_tplus");
    for (name, a) in [("N", DegreeSet::all()), ("0", DegreeSet::finite([0])), ("2", DegreeSet::finite([2]))] {
        let walk = LaWalk::new(&binary(), &a, 65).unwrap();
        let n = if name == "N" { 65 } else { 32 };
        group.bench_function(name, |b| b.iter(|| walk.conditional_tplus(n, &ev).unwrap()));
    }
    let heavy_walk = LaWalk::new(&heavy(), &DegreeSet::all(), 1024).unwrap();
    let ev: TPlusEvent = "()||3".parse().unwrap();
    group.bench_function("heavy/N/1024", |b| b.iter(|| heavy_walk.conditional_tplus(1024, &ev).unwrap()));
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let sampler = DiscreteSampler::new(&heavy()).unwrap();
    let mut rng = SampleConfig::with_seed(1).rng(0);
    c.bench_function("sample_gw/heavy", |b| b.iter(|| sample_gw_with(&sampler, 1_000_000, &mut rng).unwrap()));
}

fn projection(c: &mut Criterion) {
    let t = complete_binary(12);
    let a = DegreeSet::finite([0]);
    c.bench_function("project_tA/complete_12", |b| b.iter(|| project_ta(&t, &a).unwrap()));
}

criterion_group!(benches, walk_powering, conditional, sampling, projection);
criterion_main!(benches);
