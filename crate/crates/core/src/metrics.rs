// SPDX-License-Identifier: Apache-2.0

//! Closed-form performance metrics and the fractional-programming
//! surrogates built on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, SteeringContext};
use crate::config::SystemConfig;
use crate::error::MetricsError;
use crate::linalg::{self, CMat, CVec};

/// Lifted beamformers `W_k` and, once extracted, the vectors `w_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformerSet {
    pub w_mats: Vec<CMat>,
    pub vectors: Option<Vec<CVec>>,
}

impl BeamformerSet {
    /// Lift vectors to rank-one matrices.
    pub fn from_vectors(vectors: Vec<CVec>) -> Self {
        let w_mats = vectors.iter().map(linalg::outer).collect();
        BeamformerSet { w_mats, vectors: Some(vectors) }
    }

    pub fn from_matrices(w_mats: Vec<CMat>) -> Self {
        BeamformerSet { w_mats, vectors: None }
    }

    pub fn users(&self) -> usize {
        self.w_mats.len()
    }

    /// `R_x = sum_k W_k`.
    pub fn covariance(&self) -> CMat {
        let n = self.w_mats.first().map_or(0, |w| w.nrows());
        self.w_mats.iter().fold(CMat::zeros(n, n), |acc, w| acc + w)
    }

    pub fn transmit_power(&self, k: usize) -> f64 {
        linalg::trace_re(&self.w_mats[k])
    }

    /// `sum_{i != k} W_i`.
    pub fn interference_sum(&self, k: usize) -> CMat {
        let n = self.w_mats[k].nrows();
        self.w_mats
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .fold(CMat::zeros(n, n), |acc, (_, w)| acc + w)
    }

    pub fn vectors(&self) -> Result<&[CVec], MetricsError> {
        self.vectors.as_deref().ok_or(MetricsError::MissingVectors)
    }
}

/// `sigma^2 I + H (sum_{i != k} W_i) H^H`.
pub fn interference_plus_noise(h: &CMat, beams: &BeamformerSet, k: usize, sigma_m2: f64) -> CMat {
    let n = h.nrows();
    let lam = beams.interference_sum(k);
    let mut s = h * lam * h.adjoint();
    for i in 0..n {
        s[(i, i)] += Complex64::new(sigma_m2, 0.0);
    }
    s
}

/// SINR of user `k` under optimal linear combining:
/// `w_k^H H^H (sum_{i!=k} H w_i w_i^H H^H + sigma^2 I)^{-1} H w_k`.
pub fn sinr(h: &CMat, beams: &BeamformerSet, k: usize, sigma_m2: f64) -> Result<f64, MetricsError> {
    let vectors = beams.vectors()?;
    let lifted = BeamformerSet::from_vectors(vectors.to_vec());
    let s = interference_plus_noise(h, &lifted, k, sigma_m2);
    let g = h * &vectors[k];
    let x = linalg::solve_hpd(&s, &g)
        .ok_or_else(|| MetricsError::Dimension("interference-plus-noise not positive definite".into()))?;
    Ok((g.adjoint() * x)[(0, 0)].re.max(0.0))
}

/// `log2(1 + sinr)` with unit bandwidth.
pub fn rate(sinr_value: f64) -> f64 {
    (1.0 + sinr_value).log2()
}

/// Per-user power `Tr(W_k) + P_0 / K`.
pub fn user_power(beams: &BeamformerSet, k: usize, cfg: &SystemConfig) -> f64 {
    beams.transmit_power(k) + cfg.fixed_power_share()
}

/// `sum_k f_k R_k / (Tr(W_k) + P_0/K)`.
pub fn system_ee(rates: &[f64], beams: &BeamformerSet, cfg: &SystemConfig) -> f64 {
    rates
        .iter()
        .enumerate()
        .map(|(k, r)| cfg.weights[k] * r / user_power(beams, k, cfg))
        .sum()
}

/// Nominal rates of every user on the estimated channels.
pub fn nominal_rates(channels: &ChannelSet, beams: &BeamformerSet, sigma_m2: f64) -> Result<Vec<f64>, MetricsError> {
    (0..beams.users())
        .map(|k| sinr(&channels.h_hat[k], beams, k, sigma_m2).map(rate))
        .collect()
}

/// System EE of extracted beamformers on the estimated channels.
pub fn nominal_ee(channels: &ChannelSet, beams: &BeamformerSet, cfg: &SystemConfig) -> Result<f64, MetricsError> {
    let rates = nominal_rates(channels, beams, cfg.sigma_m2)?;
    Ok(system_ee(&rates, beams, cfg))
}

/// The three traces the CRB depends on:
/// `(Tr(A_dot^H A_dot R), Tr(A_dot^H A R), Tr(A^H A R))`.
pub fn crb_traces(ctx: &SteeringContext, r_x: &CMat) -> (f64, Complex64, f64) {
    let (g_dd, g_da, g_aa) = ctx.grams();
    (
        linalg::trace_of_product(&g_dd, r_x).re,
        linalg::trace_of_product(&g_da, r_x),
        linalg::trace_of_product(&g_aa, r_x).re,
    )
}

/// Closed-form CRB of the target angle for a point target with unknown
/// complex coefficient.
pub fn crb_theta(
    ctx: &SteeringContext,
    r_x: &CMat,
    alpha: Complex64,
    frame_len: usize,
    sigma_s2: f64,
) -> Result<f64, MetricsError> {
    let (t_dd, t_da, t_aa) = crb_traces(ctx, r_x);
    let det = t_dd * t_aa - t_da.norm_sqr();
    let denom = 2.0 * alpha.norm_sqr() * frame_len as f64 * det;
    // Cancellation in `det` is relative to the product of the traces.
    if !(denom > 0.0) || det <= 1e-13 * (t_dd * t_aa).abs() {
        return Err(MetricsError::UnidentifiableGeometry(denom));
    }
    Ok(sigma_s2 * t_aa / denom)
}

/// Quadratic-transform surrogate rate for combiner `z`. The argument of the
/// logarithm is clamped at zero so the surrogate stays a lower bound.
pub fn fp_rate(h: &CMat, beams: &BeamformerSet, k: usize, z: &CVec, sigma_m2: f64) -> f64 {
    let signal = linalg::quad_form(&(h * &beams.w_mats[k] * h.adjoint()), z).max(0.0);
    let penalty = linalg::quad_form(&interference_plus_noise(h, beams, k, sigma_m2), z);
    let inner = 2.0 * signal.sqrt() - penalty;
    (1.0 + inner.max(0.0)).log2()
}

/// `sum_k f_k (2 q_k sqrt(R_k) - q_k^2 P_k)`.
pub fn fp_objective(
    q: &[f64],
    surrogate_rates: &[f64],
    beams: &BeamformerSet,
    cfg: &SystemConfig,
) -> Result<f64, MetricsError> {
    let mut total = 0.0;
    for (k, (&qk, &rk)) in q.iter().zip(surrogate_rates).enumerate() {
        if rk < 0.0 {
            return Err(MetricsError::NegativeRate { user: k, rate: rk });
        }
        total += cfg.weights[k] * (2.0 * qk * rk.sqrt() - qk * qk * user_power(beams, k, cfg));
    }
    Ok(total)
}

/// Maximizer of the quadratic transform in `q`: `sqrt(R_k) / P_k`.
pub fn optimal_q(rate_k: f64, w_k: &CMat, cfg: &SystemConfig) -> f64 {
    rate_k.max(0.0).sqrt() / (linalg::trace_re(w_k) + cfg.fixed_power_share())
}

/// MMSE combiner `(sigma^2 I + sum_{i != k} H W_i H^H)^{-1} H w_k`.
pub fn optimal_z_nominal(h: &CMat, beams: &BeamformerSet, k: usize, sigma_m2: f64) -> Result<CVec, MetricsError> {
    let w = &beams.vectors()?[k];
    let s = interference_plus_noise(h, beams, k, sigma_m2);
    linalg::solve_hpd(&s, &(h * w))
        .ok_or_else(|| MetricsError::Dimension("interference-plus-noise not positive definite".into()))
}
