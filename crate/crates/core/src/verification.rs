// SPDX-License-Identifier: Apache-2.0

//! Independent checks of an optimizer result: rank-one certificate,
//! Monte Carlo robustness over the channel error ball, CRB and power audits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{build_steering_context, sample_error, ChannelSet, ErrorMode, SteeringContext};
use crate::config::SystemConfig;
use crate::error::{MetricsError, VerificationError};
use crate::linalg::{self, CMat, CVec};
use crate::metrics::{self, BeamformerSet};
use crate::optimizer::{RunResult, RunStatus};
use crate::rng::Rng;

/// Slack allowed on sampled SINR against the floor.
pub const SINR_TOL: f64 = 1e-6;
/// Slack allowed on the sampled quadratic constraints.
pub const SLACK_TOL: f64 = 1e-7;
/// Slack allowed on the per-user power cap.
pub const POWER_TOL: f64 = 1e-7;
/// Relative slack allowed on the CRB cap.
pub const CRB_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub rank_ratios: Vec<f64>,
    pub robust_sinr_min: Vec<f64>,
    pub robust_eq15_min: Vec<f64>,
    pub robust_eq16_max: Vec<f64>,
    /// `None` when the sensing geometry is unidentifiable.
    pub crb_value: Option<f64>,
    pub crb_ok: bool,
    pub power_ok: bool,
    pub sinr_ok: bool,
    /// Both sampled quadratic slacks within [`SLACK_TOL`].
    pub slacks_ok: bool,
    pub samples_used: usize,
}

impl VerificationReport {
    pub fn all_ok(&self) -> bool {
        self.crb_ok && self.power_ok && self.sinr_ok && self.slacks_ok
    }

    pub fn max_rank_ratio(&self) -> f64 {
        self.rank_ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields serialize")
    }
}

/// `lambda_2 / lambda_1` of a Hermitian PSD matrix.
pub fn rank_one_ratio(w: &CMat) -> Result<f64, MetricsError> {
    let ev = linalg::hermitian_eigenvalues(w);
    let l1 = ev.first().copied().unwrap_or(0.0);
    if !(l1 > 0.0) {
        return Err(MetricsError::ZeroMatrix);
    }
    let l2 = ev.get(1).copied().unwrap_or(0.0);
    Ok((l2 / l1).clamp(0.0, 1.0))
}

/// `n` error draws for an `N x M_t` channel: the first half in the interior
/// of the ball, the rest on its boundary.
pub fn draw_errors(n_rx: usize, m_t: usize, phi: f64, n_samples: usize, rng: &mut Rng) -> Vec<CMat> {
    let interior = n_samples / 2;
    (0..n_samples)
        .map(|i| {
            let mode = if i < interior { ErrorMode::Interior } else { ErrorMode::Boundary };
            sample_error(n_rx, m_t, phi, mode, rng)
        })
        .collect()
}

/// Worst SINR of user `k` over the given channel errors.
pub fn worst_sinr(h_hat: &CMat, beams: &BeamformerSet, k: usize, sigma_m2: f64, errors: &[CMat]) -> f64 {
    errors
        .par_iter()
        .map(|d| metrics::sinr(&(h_hat + d), beams, k, sigma_m2).unwrap_or(f64::NAN))
        .reduce(|| f64::INFINITY, nan_min)
}

fn nan_min(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.min(b)
    }
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Per-user worst sampled SINR, `n_samples` draws per user.
pub fn robust_sinr_check(
    beams: &BeamformerSet,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    n_samples: usize,
    rng: &mut Rng,
) -> Result<Vec<f64>, VerificationError> {
    if n_samples == 0 {
        return Err(VerificationError::NoSamples);
    }
    beams.vectors()?;
    let out = (0..channels.users())
        .map(|k| {
            let h = &channels.h_hat[k];
            let errors = draw_errors(h.nrows(), h.ncols(), channels.phi[k], n_samples, rng);
            worst_sinr(h, beams, k, cfg.sigma_m2, &errors)
        })
        .collect();
    Ok(out)
}

/// Worst sampled slacks of the two robust quadratic constraints of one user:
/// `min z^H (H+D) W (H+D)^H z - eps` and
/// `max z^H ((H+D) Lambda (H+D)^H + sigma^2 I) z - v`.
#[allow(clippy::too_many_arguments)]
pub fn quadratic_robustness_check(
    w: &CMat,
    lambda: &CMat,
    z: &CVec,
    eps: f64,
    v: f64,
    h_hat: &CMat,
    phi: f64,
    sigma_m2: f64,
    n_samples: usize,
    rng: &mut Rng,
) -> (f64, f64) {
    let errors = draw_errors(h_hat.nrows(), h_hat.ncols(), phi, n_samples, rng);
    quadratic_slacks(w, lambda, z, eps, v, h_hat, sigma_m2, &errors)
}

/// [`quadratic_robustness_check`] over explicit errors.
#[allow(clippy::too_many_arguments)]
pub fn quadratic_slacks(
    w: &CMat,
    lambda: &CMat,
    z: &CVec,
    eps: f64,
    v: f64,
    h_hat: &CMat,
    sigma_m2: f64,
    errors: &[CMat],
) -> (f64, f64) {
    let noise = sigma_m2 * linalg::norm_sq(z);
    errors
        .par_iter()
        .map(|d| {
            // z^H H X H^H z = (H^H z)^H X (H^H z)
            let y = (h_hat + d).adjoint() * z;
            (linalg::quad_form(w, &y) - eps, linalg::quad_form(lambda, &y) + noise - v)
        })
        .reduce(|| (f64::INFINITY, f64::NEG_INFINITY), |a, b| (nan_min(a.0, b.0), nan_max(a.1, b.1)))
}

/// CRB of `R_x` and whether it meets the cap. An unidentifiable geometry is
/// reported as `(None, false)`.
pub fn crb_audit(beams: &BeamformerSet, ctx: &SteeringContext, cfg: &SystemConfig) -> (Option<f64>, bool) {
    match metrics::crb_theta(ctx, &beams.covariance(), cfg.alpha, cfg.frame_len, cfg.sigma_s2) {
        Ok(value) => (Some(value), !cfg.has_crb_constraint() || value <= cfg.rho * (1.0 + CRB_REL_TOL)),
        Err(_) => (None, false),
    }
}

pub fn power_audit(beams: &BeamformerSet, cfg: &SystemConfig) -> bool {
    (0..beams.users()).all(|k| beams.transmit_power(k) <= cfg.p_max + POWER_TOL)
}

/// Every check on a converged run, `n_samples` error draws per user.
pub fn full_report(
    run: &RunResult,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    n_samples: usize,
    rng: &mut Rng,
) -> Result<VerificationReport, VerificationError> {
    if run.status != RunStatus::Converged {
        return Err(VerificationError::NotConverged(run.status.to_string()));
    }
    if n_samples == 0 {
        return Err(VerificationError::NoSamples);
    }
    let state = &run.state;
    let beams = &state.beams;
    let rank_ratios = beams.w_mats.iter().map(rank_one_ratio).collect::<Result<Vec<_>, _>>()?;
    let robust_sinr_min = robust_sinr_check(beams, channels, cfg, n_samples, rng)?;

    let mut eq15 = Vec::with_capacity(cfg.users);
    let mut eq16 = Vec::with_capacity(cfg.users);
    for k in 0..cfg.users {
        let (a, b) = quadratic_robustness_check(
            &beams.w_mats[k],
            &beams.interference_sum(k),
            &state.z_p3[k],
            state.eps[k],
            state.v[k],
            &channels.h_hat[k],
            channels.phi[k],
            cfg.sigma_m2,
            n_samples,
            rng,
        );
        eq15.push(a);
        eq16.push(b);
    }

    let (crb_value, crb_ok) = crb_audit(beams, &build_steering_context(cfg), cfg);
    let sinr_ok = robust_sinr_min.iter().zip(&cfg.zeta).all(|(s, z)| *s >= z - SINR_TOL);
    let slacks_ok = eq15.iter().all(|s| *s >= -SLACK_TOL) && eq16.iter().all(|s| *s <= SLACK_TOL);
    Ok(VerificationReport {
        rank_ratios,
        robust_sinr_min,
        robust_eq15_min: eq15,
        robust_eq16_max: eq16,
        crb_value,
        crb_ok,
        power_ok: power_audit(beams, cfg),
        sinr_ok,
        slacks_ok,
        samples_used: n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn rank_ratio_basics() {
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        assert_eq!(rank_one_ratio(&d).unwrap(), 0.0);
        assert!((rank_one_ratio(&CMat::identity(2, 2)).unwrap() - 1.0).abs() < 1e-15);
        assert!(rank_one_ratio(&CMat::zeros(3, 3)).is_err());
    }

    #[test]
    fn error_draws_split_interior_and_boundary() {
        let errs = draw_errors(2, 4, 0.3, 10, &mut Rng::new(5));
        for (i, e) in errs.iter().enumerate() {
            let s = linalg::spectral_norm(e);
            if i < 5 {
                assert!(s <= 0.3 + 1e-12);
            } else {
                assert!((s - 0.3).abs() < 1e-12);
            }
        }
    }
}
