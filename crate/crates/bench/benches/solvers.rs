use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{DMatrix, DVector};
use rcsdp_core::dc::solve_fixed;
use rcsdp_core::inner::zeta_bound;
use rcsdp_core::problem::{scale_instance, synthetic_instance};
use rcsdp_core::spectral::{kyfan_subgradient, psd_split, sym_eigen};
use rcsdp_core::{
    abcd_solve, initial_point, AbcdOptions, Algorithm, FactoredPsd, PhiTerm, SdppInstance,
    SolverConfig, SymmetricMatrix,
};

fn instance(d: usize, r: usize, p: usize, noise: f64, seed: u64) -> SdppInstance {
    let (raw, _) = synthetic_instance(d, r, p, noise, seed).unwrap();
    scale_instance(&raw).unwrap()
}

fn wave_matrix(rows: usize, cols: usize, phase: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| {
        ((i * cols + j) as f64 * 0.7 + phase).sin()
    })
}

fn operator_benchmark(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator");
    let inst = instance(50, 5, 1000, 0.1, 1);
    let v = FactoredPsd::new(wave_matrix(50, 5, 0.3)).unwrap();
    let z = DVector::from_fn(1000, |i, _| (i as f64 * 0.11).cos());

    group.bench_function("apply_factored_d50_p1000_m5", |b| {
        b.iter(|| inst.map.apply_factored(black_box(&v)).unwrap());
    });
    group.bench_function("adjoint_d50_p1000", |b| {
        b.iter(|| inst.map.adjoint(black_box(&z)).unwrap());
    });
    group.bench_function("gram_matvec_d50_p1000", |b| {
        b.iter(|| inst.map.gram_matvec(black_box(&z)).unwrap());
    });
    group.finish();
}

fn spectral_benchmark(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral");
    let m = wave_matrix(80, 80, 0.1);
    let sym = SymmetricMatrix::new(&m + m.transpose()).unwrap();

    group.bench_function("psd_split_d80", |b| {
        b.iter(|| psd_split(black_box(&sym)).unwrap());
    });
    group.bench_function("kyfan_subgradient_d80_r5", |b| {
        b.iter(|| kyfan_subgradient(&sym_eigen(black_box(&sym)).unwrap(), 5, 1.0).unwrap());
    });
    group.finish();
}

fn inner_benchmark(c: &mut Criterion) {
    let mut group = c.benchmark_group("inner");
    group.sample_size(10);
    let inst = instance(20, 3, 150, 0.1, 2);
    let center = FactoredPsd::new(wave_matrix(20, 4, 0.5) * 0.3).unwrap();
    let w = kyfan_subgradient(&sym_eigen(&center.to_dense()).unwrap(), 3, 0.1).unwrap();
    let phi = PhiTerm {
        w,
        c: 0.1,
        alpha: 5e-6,
        u_prox: center,
    };
    let zeta = zeta_bound(&inst.map, inst.n_samples, 5e-6, 1e-8);
    let opts = AbcdOptions::default();

    group.bench_function("abcd_d20_p150", |b| {
        b.iter(|| {
            abcd_solve(
                &inst.map,
                &phi,
                &inst.b,
                inst.n_samples,
                5e-6,
                zeta,
                &opts,
                None,
                None,
            )
            .unwrap()
        });
    });
    group.finish();
}

fn outer_benchmark(c: &mut Criterion) {
    let mut group = c.benchmark_group("outer");
    group.sample_size(10);
    let inst = instance(12, 2, 80, 0.05, 3);
    let cfg = SolverConfig::default();
    let u0 = initial_point(&inst, &cfg).unwrap();

    for algo in [Algorithm::Pdcae, Algorithm::Pdca, Algorithm::Sipdca] {
        group.bench_function(format!("{}_d12_p80", algo.name()), |b| {
            b.iter(|| solve_fixed(&inst, algo, 0.01, &cfg, &u0, None).unwrap());
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    operator_benchmark,
    spectral_benchmark,
    inner_benchmark,
    outer_benchmark
);
criterion_main!(benches);
