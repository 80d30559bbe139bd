use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use polymerlab::enumerate::{enumerate_measure, EnumOptions};
use polymerlab::montecarlo::{perm_replicas, McParams, PermParams};
use polymerlab::renewal::{compute_sequences, PieceMode, PieceModel};
use polymerlab::{Exec, Model, StepDistribution};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn enumeration(c: &mut Criterion) {
    let dist = StepDistribution::uniform_range(2).unwrap();
    let mut g = c.benchmark_group("enumerate_uniform2_n10");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = EnumOptions { exec, ..EnumOptions::default() };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| enumerate_measure(&dist, 10, Model::DombJoyce { beta: 0.3 }, black_box(opts)).unwrap())
        });
    }
    g.finish();
}

fn perm(c: &mut Criterion) {
    let dist = StepDistribution::simple();
    let p = PermParams { tours: 50, ..PermParams::default() };
    let mut g = c.benchmark_group("perm_8_replicas_n200");
    g.sample_size(10);
    for (name, exec) in MODES {
        let mc = McParams { replicas: 8, seed: 1, exec };
        g.bench_with_input(BenchmarkId::from_parameter(name), &mc, |b, mc| {
            b.iter(|| perm_replicas(&dist, 200, Model::DombJoyce { beta: 0.2 }, &p, black_box(mc)).unwrap())
        });
    }
    g.finish();
}

fn renewal(c: &mut Criterion) {
    let model = PieceModel::new(StepDistribution::uniform_range(2).unwrap(), 5, PieceMode::DombJoyce { beta: 0.3 });
    let mut g = c.benchmark_group("renewal_uniform2_T5_N6");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = EnumOptions { exec, ..EnumOptions::default() };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| compute_sequences(&model, 6, black_box(opts)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, enumeration, perm, renewal);
criterion_main!(benches);
