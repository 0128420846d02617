use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use std::hint::black_box;

use pairtune_core::seeds::{stream_rng, STREAM_GAMES, STREAM_PERTURBATION};
use pairtune_core::{
    benchmark_config, run_single, MatchOutcome, Method, ParamSpec, PrecisionMatrix,
    QuadraticLandscape, ScheduleParams, Tuner,
};

fn specs(n: usize, c_end: f64) -> Vec<ParamSpec> {
    (0..n)
        .map(|i| ParamSpec {
            name: format!("p{i}"),
            theta_start: 0.0,
            c_end,
            s1: Some(10.0),
            sigma: Some(100.0),
            r_end: Some(1e-3),
            lower: None,
            upper: None,
            integer_valued: false,
        })
        .collect()
}

fn bench_update_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("propose_observe");
    for method in [Method::Spsa, Method::Bspsas, Method::Bspsa] {
        for n in [4usize, 16, 64] {
            group.bench_with_input(BenchmarkId::new(method.to_string(), n), &n, |b, &n| {
                let mut tuner = Tuner::new(
                    method,
                    specs(n, 20.0),
                    ScheduleParams::recommended(1 << 40),
                    1 << 40,
                    0.6,
                    None,
                    stream_rng(1, STREAM_PERTURBATION),
                )
                .unwrap();
                let mut w_rng = stream_rng(1, STREAM_GAMES);
                b.iter(|| {
                    let p = tuner.propose().unwrap();
                    let w = MatchOutcome::new(w_rng.gen_range(-2..=2)).unwrap();
                    tuner.observe(&p.draw, w).unwrap();
                    black_box(tuner.state().k)
                });
            });
        }
    }
    group.finish();
}

fn bench_solver(c: &mut Criterion) {
    // 29 parameters matches the realistic engine-tuning dimension.
    let mut rng = stream_rng(2, STREAM_GAMES);
    let n = 29;
    let mut matrix = PrecisionMatrix::from_spreads(&vec![10.0; n]).unwrap();
    for _ in 0..100 {
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.01..0.01)).collect();
        matrix.rank1_update(&g, 0.6).unwrap();
    }
    let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    c.bench_function("solve_gauss_jordan_n29", |b| {
        b.iter(|| matrix.solve_gauss_jordan(black_box(&rhs)).unwrap())
    });
}

fn bench_play_match(c: &mut Criterion) {
    let landscape = QuadraticLandscape::uniform(16, 0.01, 0.82).unwrap();
    let mut rng = stream_rng(3, STREAM_GAMES);
    let plus: Vec<f64> = (0..16).map(|i| i as f64).collect();
    let minus: Vec<f64> = (0..16).map(|i| -(i as f64)).collect();
    c.bench_function("play_match_n16", |b| {
        b.iter(|| {
            landscape
                .play_match(black_box(&plus), black_box(&minus), &mut rng)
                .unwrap()
        })
    });
}

fn bench_short_run(c: &mut Criterion) {
    let config = benchmark_config(Method::Bspsa, 16, 2000, 1, 5, 8.0).unwrap();
    c.bench_function("run_single_bspsa_n16_2000_iters", |b| {
        b.iter(|| run_single(black_box(&config), 42).unwrap())
    });
}

criterion_group!(
    benches,
    bench_update_step,
    bench_solver,
    bench_play_match,
    bench_short_run
);
criterion_main!(benches);
