// SPDX-License-Identifier: Apache-2.0

//! Per-iteration beamforming program at fixed quadratic-transform
//! auxiliaries `(q, z)`.

use super::expr::{CMatExpr, LinExpr};
use super::lmi::{crb_lmi_expr, interference_lmi_expr, sinr_lmi_expr};
use super::problem::{ConicProblem, HermitianVar};
use crate::channel::{build_steering_context, ChannelSet};
use crate::config::SystemConfig;
use crate::error::ConicError;
use crate::linalg::{self, CMat, CVec};

/// Which constraint families to include. Dropping families is how the
/// optimizer localizes an infeasible instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct P3Options {
    pub crb: bool,
    pub sinr_floor: bool,
}

impl Default for P3Options {
    fn default() -> Self {
        P3Options { crb: true, sinr_floor: true }
    }
}

#[derive(Debug, Clone)]
pub struct P3Layout {
    pub w: Vec<HermitianVar>,
    pub r: Vec<LinExpr>,
    pub eps: Vec<LinExpr>,
    pub v: Vec<LinExpr>,
    pub s: Vec<LinExpr>,
    pub u: Vec<LinExpr>,
    /// S-procedure multipliers; absent for users with a zero error radius.
    pub lambda1: Vec<Option<LinExpr>>,
    pub lambda2: Vec<Option<LinExpr>>,
}

#[derive(Debug, Clone)]
pub struct P3 {
    pub problem: ConicProblem,
    pub layout: P3Layout,
}

/// Numerical values of the P3 variables at a solution.
#[derive(Debug, Clone, PartialEq)]
pub struct P3Values {
    pub w: Vec<CMat>,
    pub r: Vec<f64>,
    pub eps: Vec<f64>,
    pub v: Vec<f64>,
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub objective: f64,
}

impl P3 {
    pub fn extract(&self, x: &[f64]) -> P3Values {
        let l = &self.layout;
        let ev = |v: &[LinExpr]| v.iter().map(|e| e.eval(x)).collect::<Vec<_>>();
        let evo = |v: &[Option<LinExpr>]| v.iter().map(|e| e.as_ref().map_or(0.0, |e| e.eval(x))).collect();
        P3Values {
            w: l.w.iter().map(|h| linalg::hermitian_part(&h.extract(x))).collect(),
            r: ev(&l.r),
            eps: ev(&l.eps),
            v: ev(&l.v),
            s: ev(&l.s),
            u: ev(&l.u),
            lambda1: evo(&l.lambda1),
            lambda2: evo(&l.lambda2),
            objective: self.problem.objective.eval(x),
        }
    }
}

fn check_inputs(cfg: &SystemConfig, channels: &ChannelSet, q: &[f64], z: &[CVec]) -> Result<(), ConicError> {
    let k = cfg.users;
    if channels.users() != k || q.len() != k || z.len() != k || channels.phi.len() != k {
        return Err(ConicError::Dimension(format!(
            "expected {k} users, got channels={} q={} z={} phi={}",
            channels.users(),
            q.len(),
            z.len(),
            channels.phi.len()
        )));
    }
    for (i, h) in channels.h_hat.iter().enumerate() {
        if h.nrows() != cfg.rx_antennas || h.ncols() != cfg.tx_antennas {
            return Err(ConicError::Dimension(format!(
                "channel {i} is {}x{}, expected {}x{}",
                h.nrows(),
                h.ncols(),
                cfg.rx_antennas,
                cfg.tx_antennas
            )));
        }
        if z[i].len() != cfg.rx_antennas {
            return Err(ConicError::Dimension(format!("z[{i}] has length {}", z[i].len())));
        }
    }
    if q.iter().any(|x| !x.is_finite()) || z.iter().any(|v| v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite())) {
        return Err(ConicError::NonFinite("q or z".into()));
    }
    Ok(())
}

pub fn build_p3(cfg: &SystemConfig, channels: &ChannelSet, q: &[f64], z: &[CVec]) -> Result<P3, ConicError> {
    build_p3_with(cfg, channels, q, z, P3Options::default())
}

pub fn build_p3_with(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    q: &[f64],
    z: &[CVec],
    opts: P3Options,
) -> Result<P3, ConicError> {
    check_inputs(cfg, channels, q, z)?;
    let k_users = cfg.users;
    let m_t = cfg.tx_antennas;
    let mut p = ConicProblem::new("P3");
    p.metadata.insert("users".into(), k_users.to_string());
    p.metadata.insert("tx_antennas".into(), m_t.to_string());
    p.metadata.insert("rx_antennas".into(), cfg.rx_antennas.to_string());

    let w: Vec<HermitianVar> = (0..k_users).map(|k| p.add_hermitian_psd(&format!("W[{k}]"), m_t)).collect();
    let r = p.add_free("r", k_users);
    let eps = p.add_nonneg("eps", k_users);
    let v = p.add_free("v", k_users);
    let s = p.add_free("s", k_users);
    let u = p.add_free("u", k_users);
    let robust: Vec<usize> = (0..k_users).filter(|&k| channels.phi[k] > 0.0).collect();
    let l1 = p.add_nonneg("lambda1", robust.len());
    let l2 = p.add_nonneg("lambda2", robust.len());
    let mut lambda1 = vec![None; k_users];
    let mut lambda2 = vec![None; k_users];
    for (j, &k) in robust.iter().enumerate() {
        lambda1[k] = Some(l1[j].clone());
        lambda2[k] = Some(l2[j].clone());
    }

    let w_expr: Vec<CMatExpr> = w.iter().map(HermitianVar::expr).collect();
    let mut objective = LinExpr::zero();
    for k in 0..k_users {
        let f = cfg.weights[k];
        objective = objective + s[k].scale(2.0 * f * q[k]) - w[k].trace().scale(f * q[k] * q[k])
            - f * q[k] * q[k] * cfg.fixed_power_share();

        p.add_le(&format!("power[{k}]"), w[k].trace(), LinExpr::constant(cfg.p_max));
        if opts.sinr_floor {
            p.add_ge(&format!("sinr_floor[{k}]"), r[k].clone(), LinExpr::constant(cfg.zeta[k]));
        }
        // (r + v)^2 <= 4 eps
        p.add_soc(&format!("fp_rate[{k}]"), eps[k].clone() + 1.0, vec![&r[k] + &v[k], eps[k].clone() - 1.0]);
        // s^2 <= u
        p.add_soc(&format!("sqrt_epi[{k}]"), u[k].clone() + 1.0, vec![s[k].scale(2.0), u[k].clone() - 1.0]);
        // u ln 2 <= ln(1 + r)
        p.add_exp(
            &format!("log_epi[{k}]"),
            u[k].scale(std::f64::consts::LN_2),
            LinExpr::constant(1.0),
            r[k].clone() + 1.0,
        );

        let h = &channels.h_hat[k];
        let phi = channels.phi[k];
        let lam = (0..k_users)
            .filter(|&i| i != k)
            .fold(CMatExpr::zeros(m_t, m_t), |acc, i| acc.add(&w_expr[i]));
        match (&lambda1[k], &lambda2[k]) {
            (Some(a), Some(b)) => {
                p.add_hermitian_lmi(&format!("sinr_lmi[{k}]"), &sinr_lmi_expr(&w_expr[k], &z[k], h, &eps[k], a, phi))?;
                p.add_hermitian_lmi(
                    &format!("interference_lmi[{k}]"),
                    &interference_lmi_expr(&lam, &z[k], h, &v[k], b, phi, cfg.sigma_m2),
                )?;
            }
            _ => {
                let g = h.adjoint() * &z[k];
                p.add_le(&format!("signal_nominal[{k}]"), eps[k].clone(), w_expr[k].quad_form(&g));
                let zz = linalg::norm_sq(&z[k]);
                p.add_ge(&format!("interference_nominal[{k}]"), v[k].clone(), lam.quad_form(&g) + cfg.sigma_m2 * zz);
            }
        }
    }
    p.set_objective(objective);

    if opts.crb && cfg.has_crb_constraint() {
        let ctx = build_steering_context(cfg);
        let r_x = w_expr.iter().skip(1).fold(w_expr[0].clone(), |acc, m| acc.add(m));
        // Divided through by gamma so the block is O(1) near the boundary.
        let gamma = cfg.crb_gamma();
        p.add_hermitian_lmi("crb_lmi", &crb_lmi_expr(&ctx, &r_x.scale(1.0 / gamma), 1.0))?;
    }

    Ok(P3 { problem: p, layout: P3Layout { w, r, eps, v, s, u, lambda1, lambda2 } })
}
