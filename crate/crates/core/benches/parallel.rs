//! Parallel vs sequential execution of the hot paths.
//!
//! `workers=1` runs the rayon code on a single-thread pool. Building with
//! `--no-default-features` swaps in the plain sequential iterators instead.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use graphdiff_core::datasets::{dataset_stats, gen_er};
use graphdiff_core::metrics::{evaluate, KernelWidths};
use graphdiff_core::nn::{
    init_network, train_step, DiffusionSetup, NetworkConfig, OptimizerConfig, TrainState,
};
use graphdiff_core::noise::{build_schedule, ScheduleKind};
use graphdiff_core::par::with_workers;
use graphdiff_core::random::seeded;
use graphdiff_core::sampler::{generate, Denoiser, NodeCountSource, SamplerConfig};

fn small_net() -> NetworkConfig {
    NetworkConfig {
        layers: 2,
        dx: 16,
        de: 8,
        dg: 8,
        heads: 2,
        ..NetworkConfig::default()
    }
}

fn worker_counts() -> Vec<usize> {
    let all = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    if all > 1 {
        vec![1, all]
    } else {
        vec![1]
    }
}

fn bench_train_step(c: &mut Criterion) {
    let graphs = gen_er(16, 12, 12, 0.2, &mut seeded(1)).unwrap();
    let spec = dataset_stats(&graphs, 1, 2).unwrap().spec().unwrap();
    let setup = DiffusionSetup {
        schedule: build_schedule(100, ScheduleKind::Cosine).unwrap(),
        spec,
    };
    let mut group = c.benchmark_group("train_step_batch16_n12");
    for workers in worker_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(workers), &workers, |b, &w| {
            let mut state =
                TrainState::new(small_net(), OptimizerConfig::default(), &mut seeded(2)).unwrap();
            let mut rng = seeded(3);
            b.iter(|| {
                with_workers(w, || {
                    black_box(train_step(&mut state, &setup, &graphs, 0.5, true, &mut rng).unwrap())
                })
            });
        });
    }
    group.finish();
}

fn bench_generate(c: &mut Criterion) {
    let cfg = small_net();
    let weights = init_network(&cfg, &mut seeded(4)).unwrap();
    let setup = DiffusionSetup {
        schedule: build_schedule(50, ScheduleKind::Cosine).unwrap(),
        spec: graphdiff_core::GraphSpec::unattributed(0.15).unwrap(),
    };
    let model = Denoiser {
        weights: &weights,
        config: &cfg,
        setup: &setup,
    };
    let sampler = SamplerConfig {
        inference_steps: 10,
        lambda: 0.5,
        seed: 5,
    };
    let mut group = c.benchmark_group("generate_8x16_S10");
    group.sample_size(10);
    for workers in worker_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(workers), &workers, |b, &w| {
            b.iter(|| {
                with_workers(w, || {
                    black_box(generate(model, &NodeCountSource::Fixed(16), &sampler, 8).unwrap())
                })
            });
        });
    }
    group.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let a = gen_er(64, 20, 30, 0.2, &mut seeded(6)).unwrap();
    let r = gen_er(64, 20, 30, 0.2, &mut seeded(7)).unwrap();
    let widths = KernelWidths::default();
    let mut group = c.benchmark_group("evaluate_64v64");
    group.sample_size(10);
    for workers in worker_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(workers), &workers, |b, &w| {
            b.iter(|| with_workers(w, || black_box(evaluate(&a, &r, None, &widths).unwrap())));
        });
    }
    group.finish();
}

criterion_group!(benches, bench_train_step, bench_generate, bench_evaluate);
criterion_main!(benches);
