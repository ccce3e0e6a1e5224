// SPDX-License-Identifier: Apache-2.0

mod common;

use common::*;
use isac_core::channel::{build_steering_context, generate_channels, sample_error, ErrorMode, SteeringContext};
use isac_core::conic::{self, *};
use isac_core::linalg::{self, c, CMat, CVec};
use isac_core::metrics::{self, BeamformerSet};
use isac_core::{Rng, SystemConfig};

fn min_eig(m: &CMat) -> f64 {
    linalg::min_eigenvalue_hermitian(m)
}

#[test]
fn embedding_preserves_min_eigenvalue() {
    let mut rng = Rng::new(3);
    for n in 1..8 {
        let m = random_hermitian(n, &mut rng);
        let e = embed_hermitian(&m).unwrap();
        let got = linalg::min_eigenvalue_symmetric(&e);
        assert!((got - min_eig(&m)).abs() < 1e-10);
        let mut ev: Vec<f64> = e.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (i, lam) in linalg::hermitian_eigenvalues(&m).iter().enumerate() {
            assert!((ev[2 * i] - lam).abs() < 1e-10 && (ev[2 * i + 1] - lam).abs() < 1e-10);
        }
    }
}

#[test]
fn sinr_lmi_trivial_cases() {
    let w = CMat::zeros(3, 3);
    let z = CVec::zeros(2);
    let h = CMat::zeros(2, 3);
    let m = build_sinr_lmi_18(&w, &z, &h, -1.0, 0.0, 0.2);
    let mut want = CMat::zeros(4, 4);
    want[(3, 3)] = c(1.0, 0.0);
    assert_eq!(m, want);

    let mut rng = Rng::new(1);
    let w = random_psd(3, 2, 1.0, &mut rng);
    let z = random_vector(2, &mut rng);
    let h = random_matrix(2, 3, &mut rng);
    let a = build_sinr_lmi_18(&w, &z, &h, 0.5, 0.3, 0.2)[(3, 3)].re;
    let b = build_sinr_lmi_18(&w, &z, &h, 1.5, 0.3, 0.2)[(3, 3)].re;
    assert!((a - b - 1.0).abs() < 1e-12);
}

#[test]
fn interference_lmi_trivial_cases() {
    let mut rng = Rng::new(2);
    let z = random_vector(2, &mut rng);
    let h = random_matrix(2, 4, &mut rng);
    let zero = CMat::zeros(4, 4);
    let sigma = 0.1;
    let floor = sigma * linalg::norm_sq(&z);
    assert!(min_eig(&build_interference_lmi_19(&zero, &z, &h, floor + 1e-9, 0.0, 0.0, sigma)) >= -1e-15);
    assert!(min_eig(&build_interference_lmi_19(&zero, &z, &h, floor - 1e-9, 0.0, 0.0, sigma)) < 0.0);
    let lam = random_psd(4, 2, 1.0, &mut rng);
    let a = build_interference_lmi_19(&lam, &z, &h, 2.0, 0.1, 0.3, sigma)[(4, 4)].re;
    let b = build_interference_lmi_19(&lam, &z, &h, 3.0, 0.1, 0.3, sigma)[(4, 4)].re;
    assert!((b - a - 1.0).abs() < 1e-12);
}

#[test]
fn error_free_sinr_lmi_matches_nominal_threshold() {
    let mut rng = Rng::new(10);
    for trial in 0..20 {
        let m_t = 2 + trial % 5;
        let w = random_psd(m_t, 1 + trial % m_t, 0.5, &mut rng);
        let z = random_vector(2, &mut rng);
        let h = random_matrix(2, m_t, &mut rng);
        let g = h.adjoint() * &z;
        let nominal = linalg::quad_form(&w, &g);
        let base = build_sinr_lmi_18(&w, &z, &h, 0.0, 0.0, 0.0);
        let top = base.view((0, 0), (m_t, m_t)).into_owned();
        let col: CVec = base.column(m_t).rows(0, m_t).into_owned();
        let corner = base[(m_t, m_t)].re;
        let threshold = bisect_threshold(-1.0, 2.0 * nominal + 1.0, |eps| exists_multiplier(&top, &col, corner - eps, 0.0));
        assert!((threshold - nominal).abs() <= 1e-6 * nominal.max(1e-3), "{threshold} vs {nominal}");
        // Eigenvalue view: slightly below the threshold some multiplier works.
        let ok = (0..40).any(|j| min_eig(&build_sinr_lmi_18(&w, &z, &h, 0.999 * nominal, 2f64.powi(j - 10), 0.0)) >= 0.0);
        assert!(ok);
        let bad = (0..40).any(|j| min_eig(&build_sinr_lmi_18(&w, &z, &h, 1.001 * nominal, 2f64.powi(j - 10), 0.0)) >= 0.0);
        assert!(!bad);
    }
}

#[test]
fn error_free_interference_lmi_matches_nominal_threshold() {
    let mut rng = Rng::new(11);
    let sigma = 0.1;
    for trial in 0..20 {
        let m_t = 2 + trial % 5;
        let lam = random_psd(m_t, 1 + trial % m_t, 0.7, &mut rng);
        let z = random_vector(2, &mut rng);
        let h = random_matrix(2, m_t, &mut rng);
        let g = h.adjoint() * &z;
        let nominal = linalg::quad_form(&lam, &g) + sigma * linalg::norm_sq(&z);
        // Feasible iff v >= nominal. With Lambda PSD the top block of the
        // LMI is -Lambda, so the multiplier must cover it.
        let base = build_interference_lmi_19(&lam, &z, &h, 0.0, 0.0, 0.0, sigma);
        let top = base.view((0, 0), (m_t, m_t)).into_owned();
        let col: CVec = base.column(m_t).rows(0, m_t).into_owned();
        let corner = base[(m_t, m_t)].re;
        let feasible = |v: f64| {
            let shift = linalg::hermitian_eigenvalues(&lam)[0];
            let shifted = &top + CMat::identity(m_t, m_t) * c(shift, 0.0);
            exists_multiplier(&shifted, &col, corner + v, 0.0)
        };
        // Largest infeasible v.
        let threshold = bisect_threshold(0.0, 2.0 * nominal + 1.0, |v| !feasible(v));
        assert!((threshold - nominal).abs() <= 1e-6 * nominal, "{threshold} vs {nominal}");
    }
}

#[test]
fn crb_lmi_block_properties() {
    let ctx = SteeringContext::new(1.0, 4, 6);
    let mut rng = Rng::new(4);
    assert!(build_crb_lmi_21(&ctx, &CMat::zeros(4, 4), 2.0)[(0, 0)].re < 0.0);
    let r = random_psd(4, 3, 1.0, &mut rng);
    let m1 = build_crb_lmi_21(&ctx, &r, 2.0);
    let m3 = build_crb_lmi_21(&ctx, &(r.clone() * c(3.0, 0.0)), 2.0);
    assert!((m3[(0, 0)].re + 2.0 - 3.0 * (m1[(0, 0)].re + 2.0)).abs() < 1e-10);
    assert!((m3[(0, 1)] - m1[(0, 1)] * 3.0).norm() < 1e-10);
    assert!((m3[(1, 1)] - m1[(1, 1)] * 3.0).norm() < 1e-10);
    assert!(linalg::is_hermitian(&m1, 0.0));
}

#[test]
fn crb_lmi_feasibility_implies_bound() {
    let cfg = SystemConfig::default().with_tx_antennas(6);
    let ctx = build_steering_context(&cfg);
    let mut rng = Rng::new(5);
    let (mut seen_feasible, mut seen_infeasible) = (0, 0);
    for _ in 0..200 {
        let r = random_psd(6, 1 + (rng.uniform_open_closed() * 5.0) as usize, cfg.p_max, &mut rng);
        let crb = metrics::crb_theta(&ctx, &r, cfg.alpha, cfg.frame_len, cfg.sigma_s2).unwrap();
        let rho = crb * (0.5 + rng.uniform_open_closed());
        let mut c2 = cfg.clone();
        c2.rho = rho;
        let lmi = build_crb_lmi_21(&ctx, &r, c2.crb_gamma());
        if min_eig(&lmi) >= 0.0 {
            seen_feasible += 1;
            assert!(crb <= rho * (1.0 + 1e-6), "{crb} > {rho}");
        } else {
            seen_infeasible += 1;
            assert!(crb >= rho * (1.0 - 1e-6));
        }
    }
    assert!(seen_feasible > 20 && seen_infeasible > 20);
}

/// Dominant-direction beams at a fixed per-user power, with matching
/// quadratic-transform auxiliaries.
fn starting_point(cfg: &SystemConfig, channels: &isac_core::ChannelSet, power: f64) -> (Vec<f64>, Vec<CVec>) {
    let vectors: Vec<CVec> = channels
        .h_hat
        .iter()
        .map(|h| linalg::dominant_right_singular(h).1 * c(power.sqrt(), 0.0))
        .collect();
    let beams = BeamformerSet::from_vectors(vectors);
    let rates = metrics::nominal_rates(channels, &beams, cfg.sigma_m2).unwrap();
    let q = (0..cfg.users).map(|k| metrics::optimal_q(rates[k], &beams.w_mats[k], cfg)).collect();
    let z = (0..cfg.users)
        .map(|k| metrics::optimal_z_nominal(&channels.h_hat[k], &beams, k, cfg.sigma_m2).unwrap())
        .collect();
    (q, z)
}

fn count_psd(p: &ConicProblem) -> Vec<usize> {
    p.constraints.iter().filter_map(|c| c.psd_side()).collect()
}

#[test]
fn p3_dimension_count() {
    let cfg = SystemConfig::default().with_tx_antennas(6);
    let channels = generate_channels(&cfg, &mut Rng::new(0));
    let (q, z) = starting_point(&cfg, &channels, 0.05);
    let p3 = build_p3(&cfg, &channels, &q, &z).unwrap();
    let mut sizes = count_psd(&p3.problem);
    sizes.sort_unstable();
    assert_eq!(sizes, vec![4, 12, 12, 12, 14, 14, 14, 14, 14, 14]);
    assert_eq!(p3.layout.w.len(), 3);
    // Assembling twice gives the same problem.
    let again = build_p3(&cfg, &channels, &q, &z).unwrap();
    assert_eq!(p3.problem.dump(), again.problem.dump());
}

#[test]
fn p3_rejects_bad_inputs() {
    let cfg = SystemConfig::default().with_tx_antennas(6);
    let channels = generate_channels(&cfg, &mut Rng::new(0));
    let (mut q, z) = starting_point(&cfg, &channels, 0.05);
    assert!(build_p3(&cfg, &channels, &q[..2], &z).is_err());
    q[0] = f64::NAN;
    assert!(build_p3(&cfg, &channels, &q, &z).is_err());
}

#[test]
fn p3_huge_sinr_floor_is_infeasible() {
    let mut cfg = SystemConfig::default().with_tx_antennas(6);
    cfg.zeta = vec![1e9; 3];
    let channels = generate_channels(&cfg, &mut Rng::new(0));
    let (q, z) = starting_point(&cfg, &channels, 0.05);
    let sol = solve(&build_p3(&cfg, &channels, &q, &z).unwrap().problem);
    assert_eq!(sol.status, SolveStatus::Infeasible, "{}", sol.backend_status);
}

#[test]
fn p3_solution_is_robust_under_sampled_errors() {
    let cfg = SystemConfig::default().with_tx_antennas(6);
    let channels = generate_channels(&cfg, &mut Rng::new(1));
    let (q, z) = starting_point(&cfg, &channels, 0.05);
    let p3 = build_p3(&cfg, &channels, &q, &z).unwrap();
    let sol = solve(&p3.problem);
    assert!(sol.is_optimal(), "{} {:e} {:?}", sol.backend_status, sol.max_violation, sol.worst_constraint);
    let vals = p3.extract(&sol.x);
    let mut rng = Rng::new(99);
    for k in 0..cfg.users {
        assert!(vals.r[k] + vals.v[k] > 0.0);
        let lam = (0..cfg.users).filter(|&i| i != k).fold(CMat::zeros(6, 6), |a, i| a + &vals.w[i]);
        for _ in 0..1000 {
            let d = sample_error(cfg.rx_antennas, 6, channels.phi[k], ErrorMode::Boundary, &mut rng);
            let h = &channels.h_hat[k] + d;
            let g = h.adjoint() * &z[k];
            let signal = linalg::quad_form(&vals.w[k], &g);
            let interf = linalg::quad_form(&lam, &g) + cfg.sigma_m2 * linalg::norm_sq(&z[k]);
            assert!(signal - vals.eps[k] >= -1e-7, "user {k}: {}", signal - vals.eps[k]);
            assert!(vals.v[k] - interf >= -1e-7, "user {k}: {}", vals.v[k] - interf);
        }
    }
}

#[test]
fn p3_solution_satisfies_numeric_lmis() {
    let cfg = SystemConfig::default().with_tx_antennas(6);
    let channels = generate_channels(&cfg, &mut Rng::new(2));
    let (q, z) = starting_point(&cfg, &channels, 0.05);
    let p3 = build_p3(&cfg, &channels, &q, &z).unwrap();
    let sol = solve(&p3.problem);
    assert!(sol.is_optimal());
    let vals = p3.extract(&sol.x);
    let ctx = build_steering_context(&cfg);
    let r_x = vals.w.iter().fold(CMat::zeros(6, 6), |a, w| a + w);
    let crb = build_crb_lmi_21(&ctx, &r_x, cfg.crb_gamma());
    assert!(min_eig(&crb) >= -1e-7 * cfg.crb_gamma());
    let bound = metrics::crb_theta(&ctx, &r_x, cfg.alpha, cfg.frame_len, cfg.sigma_s2).unwrap();
    assert!(bound <= cfg.rho * (1.0 + 1e-6));
    for k in 0..cfg.users {
        let m = build_sinr_lmi_18(&vals.w[k], &z[k], &channels.h_hat[k], vals.eps[k], vals.lambda1[k], channels.phi[k]);
        assert!(min_eig(&m) >= -1e-7);
        assert!(linalg::trace_re(&vals.w[k]) <= cfg.p_max + 1e-7);
    }
    // The surrogate objective uses the same numbers the problem reports.
    assert!((vals.objective - sol.objective).abs() < 1e-12);
    assert!(conic::max_violation(&p3.problem, &sol.x).0 <= 1e-7);
}

#[test]
fn p5_closed_form_matches_solver() {
    let mut rng = Rng::new(6);
    for trial in 0..10 {
        let h = random_matrix(2, 5, &mut rng);
        let w = random_vector(5, &mut rng) * c(0.2, 0.0);
        let phi = 0.05 + 0.05 * trial as f64;
        let r = 0.5 + trial as f64;
        let p5 = build_p5(phi, &h, &w, r).unwrap();
        let sol = solve(&p5.problem);
        assert!(sol.is_optimal(), "{}", sol.backend_status);
        let (z_star, t_star) = p5_closed_form(phi, &h, &w, r);
        assert!((sol.objective - t_star).abs() <= 1e-6 * r, "{} vs {t_star}", sol.objective);
        let z = p5.extract_z(&sol.x);
        // t is flat to first order around the optimum, so z is only
        // determined to roughly the square root of the solver tolerance.
        assert!((&z - &z_star).norm() <= 1e-3 * z_star.norm(), "trial {trial}: {z} vs {z_star} t={} {t_star}", sol.objective);
        for name in ["lower_lmi", "upper_lmi"] {
            assert!(constraint_violation(p5.problem.constraint(name).unwrap(), &sol.x) <= 1e-7);
        }
    }
}

#[test]
fn p5_error_free_reaches_rate_cap() {
    let mut rng = Rng::new(7);
    for _ in 0..5 {
        let h = random_matrix(2, 4, &mut rng);
        let w = random_vector(4, &mut rng);
        let r = 3.7;
        let sol = solve(&build_p5(0.0, &h, &w, r).unwrap().problem);
        assert!((sol.objective - r).abs() < 1e-6);
        let anchor = random_vector(2, &mut rng);
        let mn = build_p5_nearest(&h, &w, r, sol.objective, &anchor).unwrap();
        let s2 = solve(&mn.problem);
        assert!(s2.is_optimal());
        // Projection of the anchor onto Re{g^H z} = r.
        let g = &h * &w;
        let gap = r - (g.adjoint() * &anchor)[(0, 0)].re;
        let want = &anchor + &g * c(gap / linalg::norm_sq(&g), 0.0);
        assert!((mn.extract_z(&s2.x) - &want).norm() < 1e-5 * want.norm());
    }
}

#[test]
fn p5_zero_beam_gives_zero() {
    let h = random_matrix(2, 3, &mut Rng::new(8));
    let sol = solve(&build_p5(0.1, &h, &CVec::zeros(3), 2.0).unwrap().problem);
    assert!(sol.is_optimal());
    assert!(sol.objective.abs() < 1e-7);
}

#[test]
fn dump_is_self_describing() {
    let cfg = SystemConfig::default().with_tx_antennas(6);
    let channels = generate_channels(&cfg, &mut Rng::new(0));
    let (q, z) = starting_point(&cfg, &channels, 0.05);
    let d = build_p3(&cfg, &channels, &q, &z).unwrap().problem.dump();
    for needle in ["problem P3", "block W[0] HermitianPsd(6)", "constraint crb_lmi Psd(4)", "constraint log_epi[2] Exp"] {
        assert!(d.contains(needle), "missing {needle}");
    }
}
