use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use vfdcf_core::harness::{run_experiment, ExperimentConfig, Scheme};
use vfdcf_core::moments::mc_moment_oracle;
use vfdcf_core::sca::enumerate::enumerate_modes;
use vfdcf_core::sca::PenaltyConfig;
use vfdcf_core::{Execution, Scenario, SystemConfig};

const POLICIES: [(&str, Execution); 2] = [("serial", Execution::Serial), ("parallel", Execution::Auto)];

fn moments(c: &mut Criterion) {
    let sc = Scenario::generate(&SystemConfig::reference(3, 2, 2), 0).unwrap();
    let mut g = c.benchmark_group("moment_oracle_20k");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(mc_moment_oracle(&sc, 20_000, 0, exec)))
        });
    }
    g.finish();
}

fn enumeration(c: &mut Criterion) {
    let sc = Scenario::generate(&SystemConfig::reference(4, 1, 1), 0).unwrap();
    let pen = PenaltyConfig::default();
    let mut g = c.benchmark_group("enumerate_m4");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(enumerate_modes(&sc, &pen, exec).unwrap()))
        });
    }
    g.finish();
}

fn experiment(c: &mut Criterion) {
    let mut g = c.benchmark_group("experiment_m4_8_realizations");
    g.sample_size(10);
    for (name, workers) in [("serial", 1), ("parallel", 0)] {
        let mut cfg = ExperimentConfig::desk();
        cfg.system = SystemConfig::reference(4, 1, 1);
        cfg.schemes = vec![Scheme::Vfd, Scheme::Hd];
        cfg.realizations = 8;
        cfg.parallelism = workers;
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(run_experiment(&cfg).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, moments, enumeration, experiment);
criterion_main!(benches);
