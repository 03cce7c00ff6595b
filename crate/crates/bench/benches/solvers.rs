use criterion::{black_box, criterion_group, criterion_main, Criterion};

use evnum::harness::ORACLE_TOL;
use evnum::{
    centralized_solve, default_budgets, dual_step_bound, primal_budget_step, primal_x_mu_update, sequential_project,
    DualState, PrimalState,
};
use evnum_bench::static_instance;

fn dual_round(c: &mut Criterion) {
    let p = static_instance();
    let kappa = dual_step_bound(&p);
    let mut state = DualState::new(&p);
    for _ in 0..50 {
        state.step(&p, kappa);
    }
    c.bench_function("dual round", |b| {
        b.iter(|| {
            let mut s = state.clone();
            s.step(black_box(&p), kappa);
            s
        })
    });
}

fn primal_round(c: &mut Criterion) {
    let p = static_instance();
    let state = PrimalState::with_default_budgets(&p);
    c.bench_function("primal round", |b| {
        b.iter(|| {
            let mut s = state.clone();
            s.step(black_box(&p), 1.0);
            s
        })
    });
}

fn projection(c: &mut Criterion) {
    let p = static_instance();
    let b0 = default_budgets(&p);
    let (_, mu) = primal_x_mu_update(&b0, &p);
    let stepped = primal_budget_step(&b0, &mu, 1.0);
    c.bench_function("sequential projection", |b| b.iter(|| sequential_project(black_box(&stepped), &p)));
}

fn centralized(c: &mut Criterion) {
    let p = static_instance();
    let mut group = c.benchmark_group("centralized");
    group.sample_size(10);
    group.bench_function("static instance", |b| b.iter(|| centralized_solve(black_box(&p), ORACLE_TOL).unwrap()));
    group.finish();
}

criterion_group!(benches, dual_round, primal_round, projection, centralized);
criterion_main!(benches);
