use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use snse_bench::{noise, smooth_field, LENGTH};
use snse_core::fem::{fem_initial_value, run_fem_with, FemStepper, FemSystem, PeriodicMesh};
use snse_core::spectral::bilinear;
use snse_core::{run_scheme, sample_path, SchemeKind, SchemeParams};

fn spectral(c: &mut Criterion) {
    let mut g = c.benchmark_group("bilinear");
    for m in [8, 16, 32] {
        let u = smooth_field(m, 1);
        g.bench_with_input(BenchmarkId::from_parameter(m), &u, |b, u| b.iter(|| bilinear(u, u).unwrap()));
    }
    g.finish();

    let mut g = c.benchmark_group("time-scheme-32-steps");
    g.sample_size(20);
    let q = noise(16);
    let path = sample_path(&q, 32, 1.0, 7).unwrap();
    let u0 = smooth_field(16, 2);
    for kind in [SchemeKind::Implicit, SchemeKind::SemiImplicit] {
        let p = SchemeParams::new(1.0, 1.0, 32, kind).unwrap();
        g.bench_function(kind.name(), |b| b.iter(|| run_scheme(&u0, &path, &p).unwrap()));
    }
    g.finish();

    c.bench_function("sample-path-M16-256", |b| b.iter(|| sample_path(&q, 256, 1.0, 3).unwrap()));
}

fn fem(c: &mut Criterion) {
    let mut g = c.benchmark_group("fem");
    g.sample_size(10);
    for n in [8, 16] {
        g.bench_with_input(BenchmarkId::new("assemble", n), &n, |b, &n| {
            b.iter(|| FemSystem::new(PeriodicMesh::new(LENGTH, n).unwrap()))
        });
    }
    let q = noise(8);
    let path = sample_path(&q, 16, 1.0, 5).unwrap();
    let sys = FemSystem::new(PeriodicMesh::new(LENGTH, 8).unwrap());
    let u0 = fem_initial_value(&sys, &smooth_field(8, 3)).unwrap();
    let stepper = FemStepper::new(&sys, 1.0 / 16.0, 1.0).unwrap();
    g.bench_function("16-steps-n8", |b| b.iter(|| run_fem_with(&stepper, &u0, &path, true).unwrap()));
    g.finish();
}

criterion_group!(benches, spectral, fem);
criterion_main!(benches);
