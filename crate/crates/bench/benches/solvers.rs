use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use nscauchy::fields::divergence_identity_residual;
use nscauchy::forward::{manufactured_solution, solve_forward};
use nscauchy::inversion::{assemble, minimize};
use nscauchy::weights::phi_field;
use nscauchy_bench::{config, inversion_case};

fn inversion(c: &mut Criterion) {
    let mut g = c.benchmark_group("inversion");
    g.sample_size(10);
    for n in [13, 21] {
        let (man, data, icfg) = inversion_case(n, 1e-2);
        g.bench_function(format!("assemble_{n}"), |b| {
            b.iter(|| assemble(black_box(&man.spec), &data, &icfg).unwrap())
        });
        g.bench_function(format!("minimize_{n}"), |b| {
            b.iter(|| minimize(black_box(&man.spec), &data, &icfg).unwrap())
        });
    }
    g.finish();
}

fn forward(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward");
    g.sample_size(10);
    let cfg = config(17);
    let grid = cfg.grid().unwrap();
    let man = manufactured_solution(&cfg.problem, &grid, cfg.kappa).unwrap();
    g.bench_function("solve_17", |b| b.iter(|| solve_forward(black_box(&man.spec), &grid).unwrap()));
    g.finish();
}

fn fields(c: &mut Criterion) {
    let cfg = config(33);
    let grid = cfg.grid().unwrap();
    let man = manufactured_solution(&cfg.problem, &grid, cfg.kappa).unwrap();
    let w = cfg.weight_params(cfg.t0_values()[0]).unwrap();
    c.bench_function("identity_residual_33", |b| {
        b.iter(|| divergence_identity_residual(black_box(&man.spec.a), &man.truth.v).unwrap())
    });
    c.bench_function("weight_field_33", |b| b.iter(|| phi_field(black_box(&w), &grid)));
}

criterion_group!(benches, inversion, forward, fields);
criterion_main!(benches);
