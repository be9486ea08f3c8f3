use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use hpfnav_core::field::{solve_laplace, solve_weighted, DescentOptions, SolverParams};
use hpfnav_core::grid::{CellClass, GridEnvironment};

fn bordered_env(n: usize) -> GridEnvironment {
    let mut env = GridEnvironment::new_2d(n, n, 1.0).unwrap();
    env.set_border_obstacles();
    env.set_class(env.index(n / 2, n / 2, 0), CellClass::Target);
    env
}

fn weighted_env(n: usize) -> GridEnvironment {
    let mut env = GridEnvironment::new_2d(n, 1, 1.0).unwrap();
    for i in 0..n {
        env.set_beta(i, 0.3 + 0.7 * (i as f64 / n as f64)).unwrap();
    }
    env.set_class(0, CellClass::Start);
    env.set_class(n - 1, CellClass::Target);
    env
}

fn bench_solvers(c: &mut Criterion) {
    let params = SolverParams::default();
    for n in [17usize, 33] {
        c.bench_function(&format!("laplace_{n}x{n}"), |b| {
            b.iter_batched(
                || bordered_env(n),
                |env| solve_laplace(env, &params).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    c.bench_function("weighted_strip_65", |b| {
        b.iter_batched(
            || weighted_env(65),
            |env| solve_weighted(env, &params).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_queries(c: &mut Criterion) {
    let params = SolverParams::default();
    let field = solve_laplace(bordered_env(33), &params).unwrap();
    c.bench_function("gradient_query", |b| {
        b.iter(|| field.gradient_at([7.3, 11.9, 0.0]).unwrap())
    });
    let opts = DescentOptions::for_field(&field);
    c.bench_function("descend_33x33", |b| {
        b.iter(|| field.descend([1.5, 1.5, 0.0], &opts).unwrap())
    });
}

criterion_group!(benches, bench_solvers, bench_queries);
criterion_main!(benches);
