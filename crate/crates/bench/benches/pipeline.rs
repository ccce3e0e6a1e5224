// SPDX-License-Identifier: Apache-2.0

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use isac_bench::scenario;
use isac_core::channel::build_steering_context;
use isac_core::conic::{build_p3, build_p5, embed_hermitian, ClarabelSolver, ConicSolver};
use isac_core::metrics;
use isac_core::verification::robust_sinr_check;
use isac_core::Rng;

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble_p3");
    for m_t in [6, 10, 14] {
        let (cfg, ch, st) = scenario(m_t);
        g.bench_with_input(BenchmarkId::from_parameter(m_t), &m_t, |b, _| {
            b.iter(|| build_p3(&cfg, &ch, black_box(&st.q), black_box(&st.z)).unwrap())
        });
    }
    g.finish();

    let (_, _, st) = scenario(14);
    c.bench_function("embed_hermitian_14", |b| b.iter(|| embed_hermitian(black_box(&st.beams.w_mats[0])).unwrap()));
}

fn solves(c: &mut Criterion) {
    let solver = ClarabelSolver::default();
    let mut g = c.benchmark_group("solve_p3");
    g.sample_size(10);
    for m_t in [6, 8] {
        let (cfg, ch, st) = scenario(m_t);
        let p3 = build_p3(&cfg, &ch, &st.q, &st.z).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(m_t), &m_t, |b, _| b.iter(|| solver.solve(&p3.problem)));
    }
    g.finish();

    let (cfg, ch, st) = scenario(8);
    let w = &st.beams.vectors().unwrap()[0];
    let p5 = build_p5(cfg.phi, &ch.h_hat[0], w, 1.0).unwrap();
    c.bench_function("solve_p5", |b| b.iter(|| solver.solve(&p5.problem)));
}

fn metrics_and_audit(c: &mut Criterion) {
    let (cfg, ch, st) = scenario(8);
    let ctx = build_steering_context(&cfg);
    let r_x = st.beams.covariance();
    c.bench_function("crb_theta", |b| {
        b.iter(|| metrics::crb_theta(&ctx, black_box(&r_x), cfg.alpha, cfg.frame_len, cfg.sigma_s2).unwrap())
    });
    let mut g = c.benchmark_group("robust_sinr_check");
    g.sample_size(20);
    g.bench_function("1000_samples", |b| {
        b.iter(|| robust_sinr_check(&st.beams, &ch, &cfg, 1000, &mut Rng::new(1)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, assembly, solves, metrics_and_audit);
criterion_main!(benches);
