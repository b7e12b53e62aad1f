use std::hint::black_box;

use aggrate_bench::{link_at, reference_pair, reference_problem};
use aggrate_core::{
    fw_optimize, lb_allocate, optimize_exact, optimize_lb, pgd_optimize, wf_allocate, AlternatingConfig, Constellation,
    FWConfig, PGDConfig, PowerBudget, QuadratureSpec,
};
use criterion::{criterion_group, criterion_main, Criterion};

fn probabilities(c: &mut Criterion) {
    let (pam, qam) = reference_pair();
    let p1 = link_at(0.1, pam.elec_power());
    let p2 = link_at(2.5, qam.elec_power());
    let (s1, s2) = (pam.feasible_set().unwrap(), qam.feasible_set().unwrap());
    let quad = QuadratureSpec::default();
    c.bench_function("pgd_8pam", |b| {
        b.iter(|| pgd_optimize(black_box(&pam), 1.0, &p1, &s1, &PGDConfig::default(), &quad).unwrap())
    });
    c.bench_function("pgd_16qam", |b| {
        b.iter(|| pgd_optimize(black_box(&qam), 1.0, &p2, &s2, &PGDConfig::default(), &quad).unwrap())
    });
    c.bench_function("fw_8pam", |b| {
        b.iter(|| fw_optimize(black_box(&pam), 1.0, &p1, &s1, &FWConfig::default()).unwrap())
    });
}

fn power_split(c: &mut Criterion) {
    let (pam, qam) = reference_pair();
    let p1 = link_at(20.0, pam.elec_power());
    let p2 = link_at(5.0, qam.elec_power());
    let budget = PowerBudget::new(1.0, 0.8, 1.0).unwrap();
    c.bench_function("wf_allocate", |b| {
        b.iter(|| wf_allocate(black_box(&pam), &qam, &p1, &p2, &budget, 1e-10).unwrap())
    });
    c.bench_function("lb_allocate", |b| {
        b.iter(|| lb_allocate(black_box(&pam), &qam, &p1, &p2, &budget, 1e-10).unwrap())
    });
}

fn alternation(c: &mut Criterion) {
    let prob = reference_problem();
    let cfg = AlternatingConfig::default();
    let mut group = c.benchmark_group("alternation");
    group.sample_size(10);
    group.bench_function("optimize_lb", |b| {
        b.iter(|| optimize_lb(black_box(&prob), &cfg).unwrap())
    });
    group.bench_function("optimize_exact", |b| {
        b.iter(|| optimize_exact(black_box(&prob), &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, probabilities, power_split, alternation);
criterion_main!(benches);
