use criterion::{black_box, criterion_group, criterion_main, Criterion};
use polaron_bench::spectrum_table;
use polaron_core::oracle::{build_discrete_model, converged_ground_energy, oracle_ground_energy, random_discrete_kernel, Truncation};
use polaron_core::{bound_at_order, bound_sequence};

fn hankel(c: &mut Criterion) {
    let t = spectrum_table(12, 9);
    for n in [2, 3, 5] {
        c.bench_function(&format!("bound_at_order n={n}"), |b| b.iter(|| bound_at_order(black_box(&t), n).unwrap()));
    }
    c.bench_function("bound_sequence 1..5", |b| b.iter(|| bound_sequence(black_box(&t), 5)));
}

fn eigen(c: &mut Criterion) {
    let mut g = c.benchmark_group("ground_energy");
    g.sample_size(10);
    let kernel = random_discrete_kernel(3, 3);
    let small = build_discrete_model(kernel.clone(), Truncation::PerMode(6)).unwrap();
    let large = build_discrete_model(kernel.clone(), Truncation::PerMode(14)).unwrap();
    g.bench_function("dense 343", |b| b.iter(|| oracle_ground_energy(&small).unwrap()));
    g.bench_function("lanczos 3375", |b| b.iter(|| oracle_ground_energy(&large).unwrap()));
    g.bench_function("converged", |b| b.iter(|| converged_ground_energy(&kernel, 6, 1e-11).unwrap()));
    g.finish();
}

criterion_group!(benches, hankel, eigen);
criterion_main!(benches);
