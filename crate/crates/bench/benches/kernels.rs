use criterion::{black_box, criterion_group, criterion_main, Criterion};
use num_complex::Complex64 as C64;
use vertexlab_bench::{params, point, spec};
use vertexlab_core::mellin::{quadrature_oracle, vertex_series, Descendent, MellinConfig};
use vertexlab_core::monodromy::monodromy_matrix;
use vertexlab_core::stab::stab_envelope;
use vertexlab_core::{Chamber, QSeries};

fn qseries(c: &mut Criterion) {
    let qs = QSeries::for_params(&params(1, 2));
    let x = C64::new(0.7, 0.3);
    c.bench_function("phi", |b| b.iter(|| qs.phi(black_box(x)).unwrap()));
    c.bench_function("theta", |b| b.iter(|| qs.theta(black_box(x)).unwrap()));
}

fn envelopes(c: &mut Criterion) {
    for (k, n) in [(2, 4), (3, 4)] {
        let s = spec(k, n, Chamber::Plus);
        let x = point(k);
        c.bench_function(&format!("stab_envelope k={k} n={n}"), |b| {
            b.iter(|| stab_envelope(&s, black_box(&x)).unwrap())
        });
    }
}

fn vertex(c: &mut Criterion) {
    let cfg = MellinConfig::default();
    let s = spec(2, 3, Chamber::Plus);
    let rho = Descendent::one(2, 3);
    c.bench_function("vertex_series k=2 n=3 D=4", |b| {
        b.iter(|| vertex_series(&rho, &s, 4, &cfg).unwrap())
    });
    let s = spec(1, 2, Chamber::Plus);
    let rho = Descendent::one(1, 2);
    c.bench_function("quadrature_oracle k=1 n=2 N=96", |b| {
        b.iter(|| quadrature_oracle(&rho, &s, 96).unwrap())
    });
}

fn monodromy(c: &mut Criterion) {
    let p = params(2, 4);
    c.bench_function("monodromy_matrix k=2 n=4", |b| {
        b.iter(|| monodromy_matrix(black_box(&p)).unwrap())
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(20);
    targets = qseries, envelopes, vertex, monodromy
}
criterion_main!(kernels);
