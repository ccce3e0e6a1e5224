// SPDX-License-Identifier: Apache-2.0

//! Estimated communication channels, bounded estimation errors and the
//! line-of-sight sensing geometry.
//!
//! Both apertures are half-wavelength uniform linear arrays with the phase
//! reference at element 0, so entry `m` of a steering vector is
//! `exp(i pi m sin(theta))`.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::config::SystemConfig;
use crate::error::ChannelError;
use crate::linalg::{spectral_norm, CMat, CVec, I};
use crate::rng::Rng;

/// Estimated channels `H_hat_k` (each `N x M_t`) and per-user error radii.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h_hat: Vec<CMat>,
    pub phi: Vec<f64>,
}

impl ChannelSet {
    pub fn users(&self) -> usize {
        self.h_hat.len()
    }

    pub fn rx_antennas(&self) -> usize {
        self.h_hat.first().map_or(0, |h| h.nrows())
    }

    pub fn tx_antennas(&self) -> usize {
        self.h_hat.first().map_or(0, |h| h.ncols())
    }

    /// Same estimates, different error radius for every user.
    pub fn with_phi(&self, phi: f64) -> Self {
        ChannelSet {
            h_hat: self.h_hat.clone(),
            phi: vec![phi; self.users()],
        }
    }

    /// Text dump: header `K N M_t phi`, then one line per channel row with
    /// `re,im` pairs separated by spaces, users in order.
    pub fn to_text(&self) -> Result<String, ChannelError> {
        let phi = self.phi.first().copied().unwrap_or(0.0);
        if self.phi.iter().any(|&p| p != phi) {
            return Err(ChannelError::NonUniformPhi(self.phi.clone()));
        }
        let mut out = format!("{} {} {} {:?}\n", self.users(), self.rx_antennas(), self.tx_antennas(), phi);
        for h in &self.h_hat {
            for i in 0..h.nrows() {
                let row: Vec<String> = (0..h.ncols())
                    .map(|j| format!("{:?},{:?}", h[(i, j)].re, h[(i, j)].im))
                    .collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self, ChannelError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let fmt_err = |line: usize, msg: &str| ChannelError::Format { line: line + 1, msg: msg.to_string() };
        let (hline, header) = lines.next().ok_or_else(|| fmt_err(0, "empty file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(fmt_err(hline, "header must be `K N M_t phi`"));
        }
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| fmt_err(hline, "bad integer in header"));
        let (k, n, m) = (parse_usize(fields[0])?, parse_usize(fields[1])?, parse_usize(fields[2])?);
        let phi: f64 = fields[3].parse().map_err(|_| fmt_err(hline, "bad phi"))?;
        if !(phi >= 0.0) {
            return Err(fmt_err(hline, "phi must be nonnegative"));
        }
        let mut h_hat = Vec::with_capacity(k);
        for _ in 0..k {
            let mut h = CMat::zeros(n, m);
            for i in 0..n {
                let (ln, line) = lines.next().ok_or_else(|| fmt_err(text.lines().count(), "truncated file"))?;
                let pairs: Vec<&str> = line.split_whitespace().collect();
                if pairs.len() != m {
                    return Err(fmt_err(ln, &format!("expected {m} entries, found {}", pairs.len())));
                }
                for (j, pair) in pairs.iter().enumerate() {
                    let (re, im) = pair.split_once(',').ok_or_else(|| fmt_err(ln, "entry must be `re,im`"))?;
                    let re: f64 = re.parse().map_err(|_| fmt_err(ln, "bad real part"))?;
                    let im: f64 = im.parse().map_err(|_| fmt_err(ln, "bad imaginary part"))?;
                    if !re.is_finite() || !im.is_finite() {
                        return Err(fmt_err(ln, "non-finite entry"));
                    }
                    h[(i, j)] = Complex64::new(re, im);
                }
            }
            h_hat.push(h);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(fmt_err(ln, "trailing data"));
        }
        Ok(ChannelSet { h_hat, phi: vec![phi; k] })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ChannelError> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ChannelError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Draw `K` channel estimates with i.i.d. CN(0, 1) entries.
pub fn generate_channels(cfg: &SystemConfig, rng: &mut Rng) -> ChannelSet {
    let h_hat = (0..cfg.users)
        .map(|_| CMat::from_fn(cfg.rx_antennas, cfg.tx_antennas, |_, _| rng.complex_normal()))
        .collect();
    ChannelSet { h_hat, phi: cfg.phis() }
}

/// Where in the error ball a sample lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    /// Spectral norm uniform in `(0, phi]`.
    Interior,
    /// Spectral norm exactly `phi`.
    Boundary,
}

/// Sample an `N x M_t` error with spectral norm at most `phi`: a Gaussian
/// direction rescaled to the target norm.
pub fn sample_error(n: usize, m_t: usize, phi: f64, mode: ErrorMode, rng: &mut Rng) -> CMat {
    let g = CMat::from_fn(n, m_t, |_, _| rng.complex_normal());
    let radius = match mode {
        ErrorMode::Interior => phi * rng.uniform_open_closed(),
        ErrorMode::Boundary => phi,
    };
    if phi == 0.0 {
        return CMat::zeros(n, m_t);
    }
    let s = spectral_norm(&g);
    if s == 0.0 {
        return CMat::zeros(n, m_t);
    }
    g.scale(radius / s)
}

/// `exp(i pi m sin(theta))` for `m = 0..M`.
pub fn steering_vector(theta: f64, m: usize) -> CVec {
    let s = theta.sin();
    CVec::from_fn(m, |k, _| Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 * s))
}

/// Analytic `d/dtheta` of [`steering_vector`].
pub fn steering_derivative(theta: f64, m: usize) -> CVec {
    let (s, c) = theta.sin_cos();
    CVec::from_fn(m, |k, _| {
        let phase = std::f64::consts::PI * k as f64;
        I * (phase * c) * Complex64::from_polar(1.0, phase * s)
    })
}

/// Steering vectors, their derivatives and `A = b a^H`, `A_dot`.
#[derive(Debug, Clone)]
pub struct SteeringContext {
    pub theta: f64,
    pub a: CVec,
    pub b: CVec,
    pub a_dot: CVec,
    pub b_dot: CVec,
    pub a_mat: CMat,
    pub a_dot_mat: CMat,
}

impl SteeringContext {
    pub fn new(theta: f64, m_t: usize, m_r: usize) -> Self {
        let a = steering_vector(theta, m_t);
        let b = steering_vector(theta, m_r);
        let a_dot = steering_derivative(theta, m_t);
        let b_dot = steering_derivative(theta, m_r);
        let a_mat = &b * a.adjoint();
        let a_dot_mat = &b_dot * a.adjoint() + &b * a_dot.adjoint();
        SteeringContext { theta, a, b, a_dot, b_dot, a_mat, a_dot_mat }
    }

    /// Gram matrices `(A_dot^H A_dot, A_dot^H A, A^H A)`; the CRB and its
    /// Schur-form LMI only see `R_x` through traces against these.
    pub fn grams(&self) -> (CMat, CMat, CMat) {
        let ad = &self.a_dot_mat;
        let a = &self.a_mat;
        (ad.adjoint() * ad, ad.adjoint() * a, a.adjoint() * a)
    }
}

pub fn build_steering_context(cfg: &SystemConfig) -> SteeringContext {
    SteeringContext::new(cfg.theta, cfg.tx_antennas, cfg.sensing_antennas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::rng::Rng;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn generated_shapes_and_determinism() {
        let cfg = SystemConfig { seed: 7, ..SystemConfig::default() };
        let a = generate_channels(&cfg, &mut Rng::new(7));
        let b = generate_channels(&cfg, &mut Rng::new(7));
        assert_eq!(a.users(), 3);
        assert!(a.h_hat.iter().all(|h| h.shape() == (2, 8)));
        assert_eq!(a, b);
    }

    #[test]
    fn generated_entries_have_unit_power() {
        let cfg = SystemConfig { users: 1, rx_antennas: 100, tx_antennas: 100, ..SystemConfig::default() };
        let set = generate_channels(&cfg, &mut Rng::new(11));
        let mean: f64 = set.h_hat[0].iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e4;
        assert!((0.97..=1.03).contains(&mean), "mean |h|^2 = {mean}");
    }

    #[test]
    fn error_samples_respect_ball() {
        let mut rng = Rng::new(5);
        assert_eq!(sample_error(2, 4, 0.0, ErrorMode::Boundary, &mut rng), CMat::zeros(2, 4));
        let d = sample_error(2, 8, 0.3, ErrorMode::Boundary, &mut rng);
        assert!((spectral_norm(&d) - 0.3).abs() < 1e-10);
        for _ in 0..200 {
            let d = sample_error(2, 8, 0.3, ErrorMode::Interior, &mut rng);
            assert!(spectral_norm(&d) <= 0.3 + 1e-10);
        }
    }

    #[test]
    fn steering_examples() {
        assert!(steering_vector(0.0, 4).iter().all(|&z| close(z, c(1.0, 0.0), 1e-15)));
        let v = steering_vector(PI / 2.0, 2);
        assert!(close(v[0], c(1.0, 0.0), 1e-15) && close(v[1], c(-1.0, 0.0), 1e-15));
        let v = steering_vector(PI / 3.0, 3);
        for m in 0..3 {
            let expect = Complex64::from_polar(1.0, PI * m as f64 * 0.8660254037844386);
            assert!(close(v[m], expect, 1e-12));
        }
    }

    #[test]
    fn derivative_examples() {
        let d = steering_derivative(0.0, 3);
        assert!(close(d[0], c(0.0, 0.0), 1e-15));
        assert!(close(d[1], c(0.0, PI), 1e-15));
        assert!(close(d[2], c(0.0, 2.0 * PI), 1e-15));
        assert!(steering_derivative(PI / 2.0, 5).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn context_at_broadside_is_all_ones() {
        let ctx = SteeringContext::new(0.0, 2, 2);
        assert!(ctx.a_mat.iter().all(|&z| close(z, c(1.0, 0.0), 1e-15)));
    }

    #[test]
    fn context_matrix_is_rank_one() {
        let ctx = SteeringContext::new(0.7, 4, 6);
        let sv = ctx.a_mat.singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        assert!(s[1] < 1e-12 * s[0]);
    }

    #[test]
    fn text_round_trip() {
        let cfg = SystemConfig::default();
        let set = generate_channels(&cfg, &mut Rng::new(1));
        let back = ChannelSet::from_text(&set.to_text().unwrap()).unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn text_rejects_malformed() {
        assert!(ChannelSet::from_text("1 1 2 0.1\n1,0\n").is_err());
        assert!(ChannelSet::from_text("1 1 1 0.1\n1;0\n").is_err());
        assert!(ChannelSet::from_text("").is_err());
        let mut set = generate_channels(&SystemConfig::default(), &mut Rng::new(1));
        set.phi[1] = 0.2;
        assert!(matches!(set.to_text(), Err(ChannelError::NonUniformPhi(_))));
    }

    proptest! {
        #[test]
        fn derivative_matches_central_difference(theta in -1.5f64..1.5, m in 1usize..12) {
            let h = 1e-6;
            let fd = (steering_vector(theta + h, m) - steering_vector(theta - h, m)).unscale(2.0 * h);
            let exact = steering_derivative(theta, m);
            let scale = exact.norm().max(1.0);
            prop_assert!((fd - &exact).norm() <= 1e-6 * scale);
        }

        #[test]
        fn context_derivative_matches_central_difference(theta in -1.5f64..1.5) {
            let h = 1e-6;
            let up = SteeringContext::new(theta + h, 4, 6).a_mat;
            let dn = SteeringContext::new(theta - h, 4, 6).a_mat;
            let fd = (up - dn).unscale(2.0 * h);
            let exact = SteeringContext::new(theta, 4, 6).a_dot_mat;
            prop_assert!((fd - &exact).norm() <= 1e-6 * exact.norm().max(1.0));
        }

        #[test]
        fn steering_conjugate_symmetry(theta in -3.0f64..3.0, m in 1usize..10) {
            let pos = steering_vector(theta, m);
            let neg = steering_vector(-theta, m);
            prop_assert!((neg - pos.conjugate()).norm() < 1e-12);
        }

        #[test]
        fn unit_modulus_entries(theta in -3.0f64..3.0, m in 1usize..10) {
            prop_assert!(steering_vector(theta, m).iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        }

        #[test]
        fn ball_closed_under_shrinking(seed in 0u64..500, scale in 0.0f64..=1.0) {
            let mut rng = Rng::new(seed);
            let d = sample_error(2, 6, 0.25, ErrorMode::Interior, &mut rng);
            prop_assert!(spectral_norm(&d.scale(scale)) <= 0.25 + 1e-10);
        }

        #[test]
        fn error_sampling_deterministic(seed in 0u64..1000) {
            let a = sample_error(2, 5, 0.4, ErrorMode::Boundary, &mut Rng::new(seed));
            let b = sample_error(2, 5, 0.4, ErrorMode::Boundary, &mut Rng::new(seed));
            prop_assert_eq!(a, b);
        }
    }
}
