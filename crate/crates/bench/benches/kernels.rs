use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use topoquench_core::{
    build_bhz, build_quench, build_trs_odd_quench, build_two_band_chern, chern_number, evolve_field, expm_step,
    ground_state_field, linalg, z2_half_bz, Amplitude, BlochModel, Grid, MomentumPoint, QuenchProtocol, TimeGrid,
};

fn expm(c: &mut Criterion) {
    let k = MomentumPoint::new2(0.3, -1.1);
    let two = build_two_band_chern(-1.0).unwrap().evaluate(k, 0.0);
    let four = build_bhz(-1.0).unwrap().evaluate(k, 0.0) + linalg::kron(&linalg::sigma_x(), &linalg::sigma_y());
    c.bench_function("expm_step/2x2", |b| {
        b.iter(|| expm_step(black_box(&two), 0.01).unwrap())
    });
    c.bench_function("expm_step/4x4", |b| {
        b.iter(|| expm_step(black_box(&four), 0.01).unwrap())
    });
}

fn evolve(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolve_field");
    group.sample_size(10);
    let quench = build_quench(
        Arc::new(build_two_band_chern(-1.0).unwrap()),
        Arc::new(build_two_band_chern(3.0).unwrap()),
        QuenchProtocol::smooth_tanh(0.0, 1.0, 0.2),
    )
    .unwrap();
    let tg = TimeGrid::with_step(0.0, 1.0, 0.01).unwrap();
    for n in [24, 48] {
        let f0 = ground_state_field(&quench, Grid::torus(n, n).unwrap(), 0.0, 1).unwrap();
        group.bench_with_input(BenchmarkId::new("two_band", n), &f0, |b, f0| {
            b.iter(|| evolve_field(&quench, f0, &tg, &[1.0]).unwrap())
        });
    }
    let bhz = build_bhz(-1.0).unwrap();
    let gen = build_trs_odd_quench(
        &bhz,
        Arc::new(build_two_band_chern(3.0).unwrap()),
        Amplitude::Constant(1.0),
    )
    .unwrap();
    let f0 = ground_state_field(&bhz, Grid::torus(24, 24).unwrap(), 0.0, 2).unwrap();
    group.bench_function("trs_odd_bhz/24", |b| {
        b.iter(|| evolve_field(&gen, &f0, &tg, &[1.0]).unwrap())
    });
    group.finish();
}

fn invariants(c: &mut Criterion) {
    let mut group = c.benchmark_group("invariants");
    for n in [40, 96] {
        let f = ground_state_field(&build_two_band_chern(-1.0).unwrap(), Grid::torus(n, n).unwrap(), 0.0, 1).unwrap();
        group.bench_with_input(BenchmarkId::new("chern_number", n), &f, |b, f| {
            b.iter(|| chern_number(f).unwrap())
        });
    }
    let bhz = build_bhz(-1.0).unwrap();
    let f = ground_state_field(&bhz, Grid::torus(40, 40).unwrap(), 0.0, 2).unwrap();
    let trs = bhz.trs();
    group.bench_function("z2_half_bz/40", |b| b.iter(|| z2_half_bz(&f, &trs).unwrap()));
    group.finish();
}

criterion_group!(benches, expm, evolve, invariants);
criterion_main!(benches);
