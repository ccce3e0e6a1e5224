// SPDX-License-Identifier: Apache-2.0

//! Robust-constraint LMI blocks. Each builder exists in an expression form,
//! used when assembling problems, and a numeric form that evaluates the same
//! expression at fixed data.

use super::expr::{bordered, CLinExpr, CMatExpr, LinExpr};
use crate::channel::SteeringContext;
use crate::linalg::{self, CMat, CVec};

/// Useful-signal LMI for user `k`:
/// `[[W + l I, W g], [g^H W, g^H W g - eps - l phi^2 |z|^2]]` with `g = H^H z`.
pub fn sinr_lmi_expr(
    w: &CMatExpr,
    z: &CVec,
    h_hat: &CMat,
    eps: &LinExpr,
    lambda: &LinExpr,
    phi: f64,
) -> CMatExpr {
    let g = h_hat.adjoint() * z;
    let zz = linalg::norm_sq(z);
    let corner = &(&w.quad_form(&g) - eps) - &lambda.scale(phi * phi * zz);
    bordered(&w.add_diagonal(lambda), &w.mul_vec(&g), &corner)
}

/// Interference LMI for user `k` with `Lambda = sum_{i != k} W_i`.
pub fn interference_lmi_expr(
    lambda_k: &CMatExpr,
    z: &CVec,
    h_hat: &CMat,
    v: &LinExpr,
    lambda: &LinExpr,
    phi: f64,
    sigma_m2: f64,
) -> CMatExpr {
    let g = h_hat.adjoint() * z;
    let zz = linalg::norm_sq(z);
    let neg = lambda_k.neg();
    let corner = neg.quad_form(&g) + v.clone() - sigma_m2 * zz - lambda.scale(phi * phi * zz);
    bordered(&neg.add_diagonal(lambda), &neg.mul_vec(&g), &corner)
}

/// Schur-complement CRB block
/// `[[Tr(Ad^H Ad R) - gamma, Tr(Ad^H A R)], [., Tr(A^H A R)]]`.
pub fn crb_lmi_expr(ctx: &SteeringContext, r_x: &CMatExpr, gamma: f64) -> CMatExpr {
    let (g_dd, g_da, g_aa) = ctx.grams();
    let t_dd = r_x.trace_with(&g_dd).re - gamma;
    let t_da = r_x.trace_with(&g_da);
    let t_aa = r_x.trace_with(&g_aa).re;
    let mut m = CMatExpr::zeros(2, 2);
    *m.at_mut(0, 0) = CLinExpr::real(t_dd);
    *m.at_mut(1, 0) = t_da.conj();
    *m.at_mut(0, 1) = t_da;
    *m.at_mut(1, 1) = CLinExpr::real(t_aa);
    m
}

fn constant(m: &CMat) -> CMatExpr {
    CMatExpr::from_constant(&linalg::hermitian_part(m))
}

pub fn build_sinr_lmi_18(w_k: &CMat, z_k: &CVec, h_hat_k: &CMat, eps_k: f64, lambda_1k: f64, phi: f64) -> CMat {
    sinr_lmi_expr(&constant(w_k), z_k, h_hat_k, &LinExpr::constant(eps_k), &LinExpr::constant(lambda_1k), phi)
        .eval(&[])
}

pub fn build_interference_lmi_19(
    lambda_k: &CMat,
    z_k: &CVec,
    h_hat_k: &CMat,
    v_k: f64,
    lambda_2k: f64,
    phi: f64,
    sigma_m2: f64,
) -> CMat {
    interference_lmi_expr(
        &constant(lambda_k),
        z_k,
        h_hat_k,
        &LinExpr::constant(v_k),
        &LinExpr::constant(lambda_2k),
        phi,
        sigma_m2,
    )
    .eval(&[])
}

pub fn build_crb_lmi_21(ctx: &SteeringContext, r_x: &CMat, gamma: f64) -> CMat {
    crb_lmi_expr(ctx, &constant(r_x), gamma).eval(&[])
}
