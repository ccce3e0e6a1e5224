// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use isac_core::linalg::{self, c, CMat, CVec};
use isac_core::Rng;
use num_complex::Complex64;
use std::f64::consts::PI;

pub fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| rng.complex_normal())
}

pub fn random_vector(n: usize, rng: &mut Rng) -> CVec {
    CVec::from_fn(n, |_, _| rng.complex_normal())
}

/// Random PSD matrix of the given rank, scaled to trace `trace`.
pub fn random_psd(n: usize, rank: usize, trace: f64, rng: &mut Rng) -> CMat {
    let g = random_matrix(n, rank, rng);
    let m = &g * g.adjoint();
    let t = linalg::trace_re(&m);
    linalg::hermitian_part(&(m * c(trace / t, 0.0)))
}

pub fn random_hermitian(n: usize, rng: &mut Rng) -> CMat {
    let g = random_matrix(n, n, rng);
    linalg::hermitian_part(&g)
}

/// Feasibility of `[[A + l I, b], [b^H, d - l k]] >= 0` for some `l >= 0`,
/// decided by a generalized Schur complement along a doubling grid of `l`.
/// `A` must be PSD.
pub fn exists_multiplier(a: &CMat, b: &CVec, d: f64, k: f64) -> bool {
    let n = a.nrows();
    let mut l: f64 = 1e-12;
    while l < 1e18 {
        let shifted = a + CMat::identity(n, n) * c(l, 0.0);
        if let Some(x) = linalg::solve_hpd(&shifted, b) {
            let schur = d - l * k - (b.adjoint() * x)[(0, 0)].re;
            if schur >= 0.0 {
                return true;
            }
        }
        l *= 2.0;
    }
    false
}

/// Largest `e` in `[lo, hi]` with `feasible(e)`, assuming monotonicity.
pub fn bisect_threshold(mut lo: f64, mut hi: f64, feasible: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    lo
}

/// Golden-section maximizer of a unimodal function on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
        if (b - a).abs() < 1e-14 {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Brute-force single-user energy efficiency: dominant right singular
/// direction and a scalar power search.
pub fn single_user_ee_oracle(h: &CMat, sigma_m2: f64, p_max: f64, p_0: f64) -> f64 {
    let (s, _) = linalg::dominant_right_singular(h);
    let gain = s * s / sigma_m2;
    let ee = |p: f64| (1.0 + p * gain).log2() / (p + p_0);
    golden_max(ee, 0.0, p_max).1.max(ee(p_max))
}

/// `[a(theta), da/dtheta]` for a half-wavelength array of `m` elements.
fn steering_pair(theta: f64, m: usize) -> (CVec, CVec) {
    let (s, c) = theta.sin_cos();
    let a = CVec::from_fn(m, |k, _| Complex64::from_polar(1.0, PI * k as f64 * s));
    let da = CVec::from_fn(m, |k, _| a[k] * Complex64::new(0.0, PI * k as f64 * c));
    (a, da)
}

/// CRB of `theta` from the 3x3 Fisher information of `(theta, Re alpha,
/// Im alpha)` for `Y = alpha A(theta) X + N` with `X X^H = L R_x` and
/// circular noise of variance `sigma_s2`.
pub fn crb_fim_oracle(theta: f64, m_t: usize, m_r: usize, r_x: &CMat, alpha: Complex64, l: usize, sigma_s2: f64) -> f64 {
    let (a, da) = steering_pair(theta, m_t);
    let (b, db) = steering_pair(theta, m_r);
    let big_a = &b * a.adjoint();
    let d_a = &db * a.adjoint() + &b * da.adjoint();
    // d mu / d xi_i as matrices acting on X.
    let derivs = [d_a * alpha, big_a.clone(), big_a * Complex64::new(0.0, 1.0)];
    let mut fim = nalgebra::DMatrix::<f64>::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            let g = derivs[i].adjoint() * &derivs[j] * r_x;
            fim[(i, j)] = 2.0 * l as f64 / sigma_s2 * g.trace().re;
        }
    }
    fim.try_inverse().expect("identifiable instance")[(0, 0)]
}
