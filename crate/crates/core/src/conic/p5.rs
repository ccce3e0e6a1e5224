// SPDX-License-Identifier: Apache-2.0

//! Robust combiner update for one user at fixed beamformer and rate target.

use super::expr::{bordered, CLinExpr, CMatExpr, LinExpr};
use super::problem::ConicProblem;
use crate::error::ConicError;
use crate::linalg::{self, c, CMat, CVec};

#[derive(Debug, Clone)]
pub struct P5 {
    pub problem: ConicProblem,
    /// `(re, im)` of each combiner entry.
    pub z: Vec<CLinExpr>,
    pub t: LinExpr,
    pub lambda: Option<LinExpr>,
}

impl P5 {
    pub fn extract_z(&self, x: &[f64]) -> CVec {
        CVec::from_iterator(self.z.len(), self.z.iter().map(|e| e.eval(x)))
    }
}

fn check(h_hat: &CMat, w: &CVec, r: f64) -> Result<(), ConicError> {
    if h_hat.ncols() != w.len() {
        return Err(ConicError::Dimension(format!("channel has {} columns, w has {}", h_hat.ncols(), w.len())));
    }
    if !r.is_finite() || w.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(ConicError::NonFinite("w or r".into()));
    }
    Ok(())
}

fn real_inner(g: &CVec, z: &[CLinExpr]) -> LinExpr {
    // Re{g^H z} = sum g_re z_re + g_im z_im
    z.iter().zip(g.iter()).fold(LinExpr::zero(), |acc, (zi, gi)| acc.add_scaled(&zi.re, gi.re).add_scaled(&zi.im, gi.im))
}

fn combiner_vars(p: &mut ConicProblem, n: usize) -> Vec<CLinExpr> {
    let raw = p.add_free("z", 2 * n);
    raw.chunks(2).map(|pair| CLinExpr { re: pair[0].clone(), im: pair[1].clone() }).collect()
}

/// Maximize the worst-case lower bound `t` on `Re{w^H (H + D)^H z}` over the
/// error ball while capping the same quantity at `r` for every `D`.
pub fn build_p5(phi: f64, h_hat: &CMat, w: &CVec, r: f64) -> Result<P5, ConicError> {
    check(h_hat, w, r)?;
    let n = h_hat.nrows();
    let mut p = ConicProblem::new("P5");
    p.metadata.insert("rx_antennas".into(), n.to_string());
    let z = combiner_vars(&mut p, n);
    let t = p.add_free("t", 1).remove(0);
    let g = h_hat * w;
    let inner = real_inner(&g, &z);
    p.set_objective(t.clone());
    if phi == 0.0 {
        p.add_ge("lower", inner.clone(), t.clone());
        p.add_le("upper", inner, LinExpr::constant(r));
        return Ok(P5 { problem: p, z, t, lambda: None });
    }
    let lambda = p.add_nonneg("lambda_z", 1).remove(0);
    let ww = linalg::norm_sq(w);
    let pen = lambda.scale(phi * phi * ww);
    let top = CMatExpr::zeros(n, n).add_diagonal(&lambda);
    let half: Vec<CLinExpr> = z.iter().map(|e| e.mul_const(c(0.5, 0.0))).collect();
    let minus_half: Vec<CLinExpr> = z.iter().map(|e| e.mul_const(c(-0.5, 0.0))).collect();
    let lower = &(&inner - &t) - &pen;
    let upper = &(inner.scale(-1.0) + r) - &pen;
    p.add_hermitian_lmi("lower_lmi", &bordered(&top, &half, &lower))?;
    p.add_hermitian_lmi("upper_lmi", &bordered(&top, &minus_half, &upper))?;
    Ok(P5 { problem: p, z, t, lambda: Some(lambda) })
}

/// Combiner closest to `anchor` among the optima of the error-free
/// program, which leaves a whole hyperplane of `z` optimal.
pub fn build_p5_nearest(h_hat: &CMat, w: &CVec, r: f64, t_star: f64, anchor: &CVec) -> Result<P5, ConicError> {
    check(h_hat, w, r)?;
    let n = h_hat.nrows();
    if anchor.len() != n {
        return Err(ConicError::Dimension(format!("anchor has length {}, expected {n}", anchor.len())));
    }
    let mut p = ConicProblem::new("P5-nearest");
    let z = combiner_vars(&mut p, n);
    let tau = p.add_free("tau", 1).remove(0);
    let inner = real_inner(&(h_hat * w), &z);
    let floor = t_star.min(r);
    p.add_ge("lower", inner.clone(), LinExpr::constant(floor));
    p.add_le("upper", inner, LinExpr::constant(r));
    let offsets: Vec<LinExpr> = z
        .iter()
        .zip(anchor.iter())
        .flat_map(|(e, a)| [e.re.clone() - a.re, e.im.clone() - a.im])
        .collect();
    p.add_soc("distance", tau.clone(), offsets);
    p.set_objective(tau.scale(-1.0));
    Ok(P5 { problem: p, t: LinExpr::constant(floor), z, lambda: None })
}

/// Closed-form optimum of [`build_p5`] for a nonzero effective channel:
/// `z = c g / |g|` with `c = r / (|g| + phi |w|)`, returning `(z, t)`.
pub fn p5_closed_form(phi: f64, h_hat: &CMat, w: &CVec, r: f64) -> (CVec, f64) {
    let g = h_hat * w;
    let gn = g.norm();
    let wn = w.norm();
    let scale = r / (gn + phi * wn);
    (g.map(|x| x * (scale / gn)), r * (gn - phi * wn) / (gn + phi * wn))
}
