use criterion::{black_box, criterion_group, criterion_main, Criterion};
use polaron_bench::{discrete_spec, rest_spec};
use polaron_core::oracle::{build_discrete_model, oracle_moments, random_discrete_kernel, Truncation};
use polaron_core::wick::enumerate_contractions;
use polaron_core::{radial_integral, MomentEngine};

fn closed_forms(c: &mut Criterion) {
    let cf = radial_integral(12, 6).unwrap();
    c.bench_function("radial_integral(12,6) build", |b| b.iter(|| radial_integral(black_box(12), black_box(6))));
    c.bench_function("radial_integral(12,6) evaluate", |b| b.iter(|| cf.evaluate(black_box(2.0))));
}

fn contractions(c: &mut Criterion) {
    let rest = rest_spec(1.0, 1.0);
    let discrete = discrete_spec(7);
    let mut g = c.benchmark_group("enumerate_contractions");
    g.sample_size(10);
    for m in [3, 4, 5] {
        g.bench_function(format!("continuum m={m}"), |b| b.iter(|| enumerate_contractions(&rest.ladder, m, false)));
    }
    g.bench_function("discrete m=4", |b| b.iter(|| enumerate_contractions(&discrete.ladder, 4, false)));
    g.finish();
}

fn moment_tables(c: &mut Criterion) {
    let mut g = c.benchmark_group("moment_table");
    g.sample_size(10);
    g.bench_function("continuum M_0..M_5", |b| {
        b.iter(|| MomentEngine::default().moment_table(&rest_spec(1.0, 1.0), 5).unwrap())
    });
    let spec = discrete_spec(7);
    let engine = MomentEngine::default();
    engine.moment_table(&spec, 5).unwrap();
    g.bench_function("discrete M_0..M_5 (shapes cached)", |b| b.iter(|| engine.moment_table(&spec, 5).unwrap()));
    let model = build_discrete_model(random_discrete_kernel(7, 3), Truncation::PerMode(4)).unwrap();
    g.bench_function("fock oracle M_0..M_5", |b| b.iter(|| oracle_moments(&model, 5).unwrap()));
    g.finish();
}

criterion_group!(benches, closed_forms, contractions, moment_tables);
criterion_main!(benches);
