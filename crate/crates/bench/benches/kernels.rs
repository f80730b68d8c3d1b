use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use iphsem_bench::{gompertz_model, gompertz_panel};
use iphsem_core::expm::{matrix_exponential, matrix_exponential_log_scaled};
use iphsem_core::sem::{initialize, sem_iteration, FitConfig, SemState};
use iphsem_core::sim::{JumpChain, Purpose, RandomStream, DEFAULT_MAX_BRIDGE_ATTEMPTS};
use iphsem_core::StateId;

fn expm(c: &mut Criterion) {
    let m = gompertz_model().lambda.rates().clone();
    c.bench_function("expm_3x3", |b| b.iter(|| matrix_exponential(black_box(&m), black_box(7.5)).unwrap()));
    c.bench_function("expm_log_scaled_3x3_large_t", |b| {
        b.iter(|| matrix_exponential_log_scaled(black_box(&m), black_box(1e4)).unwrap())
    });
}

fn bridge(c: &mut Criterion) {
    let chain = JumpChain::new(&gompertz_model().lambda);
    let stream = RandomStream::new(1);
    let (x, y) = (StateId::from_number(1).unwrap(), StateId::from_number(2).unwrap());
    let mut i = 0u64;
    c.bench_function("bridge_1_to_2", |b| {
        b.iter(|| {
            i += 1;
            let mut rng = stream.substream(Purpose::Sem, i, 0, 0);
            chain.bridge(0.0, x, 3.0, y, &mut rng, DEFAULT_MAX_BRIDGE_ATTEMPTS).unwrap()
        })
    });
}

fn sem_step(c: &mut Criterion) {
    let panel = gompertz_panel(200, 1);
    let config = FitConfig {
        seed: 1,
        ..FitConfig::default()
    };
    let init = initialize(&panel, &config).unwrap();
    let state = SemState {
        lambda: init.lambda.clone(),
        beta: 0.1,
    };
    let mut group = c.benchmark_group("sem");
    group.sample_size(20);
    group.bench_function("iteration_k200", |b| {
        b.iter(|| sem_iteration(&panel, &init.pi, &state, &config, 1).unwrap())
    });
    group.finish();
}

criterion_group!(benches, expm, bridge, sem_step);
criterion_main!(benches);
