use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stfair_core::channel::{drop_users, stream_rng, CellConfig, CellSampler, PerformanceSampler};
use stfair_core::feasibility::inequality_feasible;
use stfair_core::harness::oracle_optimal_utility;
use stfair_core::strategies::{run_window, Strategy};
use stfair_core::{Rational, TemporalDemand, ThresholdVector, VirtualUserCatalog};

fn r(p: i64, q: i64) -> Rational {
    Rational::new(p, q).unwrap()
}

fn downlink() -> (VirtualUserCatalog, TemporalDemand, CellSampler) {
    let cat = VirtualUserCatalog::homogeneous(5, 2).unwrap();
    let demand = TemporalDemand::uniform(5, r(1, 5), r(1, 1)).unwrap();
    let cfg = CellConfig::default();
    let sampler = CellSampler::new(&drop_users(&cfg, 7).unwrap(), &cat, &cfg).unwrap();
    (cat, demand, sampler)
}

fn bench_cell_sampler(c: &mut Criterion) {
    let (cat, _, sampler) = downlink();
    let mut rng = stream_rng(1, 0);
    let mut out = vec![0.0; cat.len()];
    c.bench_function("cell_sampler_slot", |b| {
        b.iter(|| {
            sampler.sample(&mut rng, &mut out);
            black_box(&out);
        })
    });
}

fn bench_atbs_window(c: &mut Criterion) {
    let (cat, demand, sampler) = downlink();
    let strategy = Strategy::Atbs { thresholds: ThresholdVector::zeros(5), audit: false };
    let mut group = c.benchmark_group("atbs_window");
    for s in [10u64, 100, 1_000] {
        group.bench_with_input(BenchmarkId::from_parameter(s), &s, |b, &s| {
            let mut rng = stream_rng(2, s);
            b.iter(|| run_window(&strategy, s, &demand, &cat, &sampler, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn bench_oracle(c: &mut Criterion) {
    let cat = VirtualUserCatalog::homogeneous(3, 2).unwrap();
    let demand = TemporalDemand::uniform(3, r(1, 4), r(3, 4)).unwrap();
    let rates: Vec<Rational> = (0..cat.len() as i64).map(|j| r(j, 1)).collect();
    let mut group = c.benchmark_group("oracle");
    for s in [8u64, 16, 32] {
        group.bench_with_input(BenchmarkId::from_parameter(s), &s, |b, &s| {
            b.iter(|| oracle_optimal_utility(s, &demand, &cat, &rates).unwrap())
        });
    }
    group.finish();
}

fn bench_feasibility(c: &mut Criterion) {
    let (_, demand, _) = downlink();
    c.bench_function("inequality_feasible_1_to_100", |b| {
        b.iter(|| (1..=100u64).filter(|&s| inequality_feasible(s, &demand, 2).unwrap().feasible).count())
    });
}

criterion_group!(benches, bench_cell_sampler, bench_atbs_window, bench_oracle, bench_feasibility);
criterion_main!(benches);
