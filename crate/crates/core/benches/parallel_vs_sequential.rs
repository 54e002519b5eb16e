//! Batch kernels on the default rayon pool against a one-thread pool, and
//! the raw `par::map` helper against `par::map_seq`. Built without the
//! `parallel` feature both columns run the sequential path.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use swlyap::canonical::{NormConfig, SampledNorm};
use swlyap::critical::{calibrate_critical, epsilon_family, worst_case_product, CriticalPair, DEFAULT_ALPHA};
use swlyap::lab::{build_feasibility_lp, solve_lp, PiecesScanConfig};
use swlyap::par;
use swlyap::synth::{sphere_sequence, synthesize_polyhedral, CandidateFunction};
use swlyap::verify::{verify_sampled, VerifyTolerance};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let build = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    vec![("sequential", build(1)), ("parallel", build(0))]
}

fn fixture() -> (CriticalPair, SampledNorm) {
    let pair = calibrate_critical(DEFAULT_ALPHA, None, 1e-6).unwrap();
    let set = epsilon_family(&pair, 0.05).unwrap();
    let cfg = PiecesScanConfig::default().norm_config(&pair, 256);
    let norm = SampledNorm::build(&set, None, &cfg).unwrap();
    (pair, norm)
}

fn helpers(c: &mut Criterion) {
    let (_, norm) = fixture();
    let points = sphere_sequence(2, 1 << 15);
    let mut g = c.benchmark_group("eval_norm_32k");
    g.bench_function("map_seq", |b| b.iter(|| black_box(par::map_seq(&points, |x| norm.eval(x)))));
    g.bench_function("map", |b| b.iter(|| black_box(par::map(&points, |x| norm.eval(x)))));
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let (pair, norm) = fixture();
    let set = epsilon_family(&pair, 0.05).unwrap();
    let w = CandidateFunction::Polyhedral(synthesize_polyhedral(&norm, 512).unwrap());
    let lp = build_feasibility_lp(&set, 4, 128, 1e-3, 1e6, 1.0).unwrap();
    let mut g = c.benchmark_group("kernels");
    g.sample_size(10);
    for (label, pool) in pools() {
        g.bench_with_input(BenchmarkId::new("build_norm", label), &pool, |b, pool| {
            b.iter(|| pool.install(|| SampledNorm::build(&set, None, &NormConfig::with_steps(pair.t1 / 32.0, 256)).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("synthesize_1024", label), &pool, |b, pool| {
            b.iter(|| pool.install(|| synthesize_polyhedral(&norm, 1024).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("verify_sampled_8192", label), &pool, |b, pool| {
            b.iter(|| pool.install(|| verify_sampled(&w, &set, 8192, &VerifyTolerance::default()).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("worst_case_grid_64", label), &pool, |b, pool| {
            b.iter(|| pool.install(|| worst_case_product(&pair.m1, &pair.m2, std::f64::consts::PI, 64).unwrap()))
        });
        // Each LP solve is single-threaded; this row checks that stays true.
        g.bench_with_input(BenchmarkId::new("solve_lp_deg4", label), &pool, |b, pool| {
            b.iter(|| pool.install(|| black_box(solve_lp(&lp))))
        });
    }
    g.finish();
}

criterion_group!(benches, helpers, kernels);
criterion_main!(benches);
