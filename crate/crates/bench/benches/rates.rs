use std::hint::black_box;

use aggrate_bench::{link_at, reference_pair};
use aggrate_core::{bounds_aggregate, link_rate, Constellation, QuadratureSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn link_rates(c: &mut Criterion) {
    let (pam, qam) = reference_pair();
    let p1 = link_at(10.0, pam.elec_power());
    let p2 = link_at(10.0, qam.elec_power());
    let rules = [
        ("gh48", QuadratureSpec::default()),
        ("grid401", QuadratureSpec::truncated_grid(401, 8.0)),
        ("mc20000", QuadratureSpec::monte_carlo(20_000, 1)),
    ];
    let mut group = c.benchmark_group("link_rate");
    for (name, quad) in &rules {
        group.bench_with_input(BenchmarkId::new("8-PAM", name), quad, |b, q| {
            b.iter(|| link_rate(black_box(&pam), 1.0, &p1, q).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("16-QAM", name), quad, |b, q| {
            b.iter(|| link_rate(black_box(&qam), 1.0, &p2, q).unwrap())
        });
    }
    group.finish();
}

fn bounds(c: &mut Criterion) {
    let (pam, qam) = reference_pair();
    let p1 = link_at(10.0, pam.elec_power());
    let p2 = link_at(10.0, qam.elec_power());
    c.bench_function("bounds_aggregate", |b| {
        b.iter(|| bounds_aggregate(black_box(&pam), black_box(&qam), 1.0, 1.0, &p1, &p2))
    });
}

criterion_group!(benches, link_rates, bounds);
criterion_main!(benches);
