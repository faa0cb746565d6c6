use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_snell::oracle::crosscheck;
use robust_snell::priors::PriorMode;
use robust_snell::random::{random_instance, Limits};
use robust_snell::{price, solve, universal_decompose, BarrierDirection, CrrParams};
use std::hint::black_box;

fn crr(steps: usize) -> CrrParams {
    CrrParams {
        s0: 100.0,
        up: 1.1,
        down: 1.0 / 1.1,
        steps,
        rate: 0.001,
        strike: 100.0,
        barrier: 90.0,
        direction: BarrierDirection::CrossedBelow,
        q_up: 0.5,
        ambiguity: [0.45, 0.55],
    }
}

fn bench_price(c: &mut Criterion) {
    let mut group = c.benchmark_group("crr_price");
    group.sample_size(10);
    for steps in [8, 12, 16] {
        let p = crr(steps);
        group.bench_with_input(BenchmarkId::from_parameter(steps), &p, |b, p| {
            b.iter(|| price(black_box(p)).unwrap().h_s)
        });
    }
    group.finish();
}

fn bench_solve_and_decompose(c: &mut Criterion) {
    let report = price(&crr(14)).unwrap();
    c.bench_function("solve_14", |b| {
        b.iter(|| solve(&report.tree, &report.payoff, &report.priors).unwrap())
    });
    c.bench_function("decompose_14", |b| {
        b.iter(|| universal_decompose(&report.tree, &report.solution, &report.priors))
    });
}

fn bench_oracle(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = random_instance(&mut rng, Limits::default(), PriorMode::Closure);
    c.bench_function("crosscheck_random", |b| {
        b.iter(|| crosscheck(&f.tree, &f.payoff, &f.priors).unwrap().max_deviation())
    });
}

criterion_group!(benches, bench_price, bench_solve_and_decompose, bench_oracle);
criterion_main!(benches);
