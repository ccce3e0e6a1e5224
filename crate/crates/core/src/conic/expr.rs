// SPDX-License-Identifier: Apache-2.0

//! Affine expressions over the real scalar variables of a [`ConicProblem`].
//!
//! [`ConicProblem`]: super::ConicProblem

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::linalg::{CMat, CVec};

/// `constant + sum coef * x[var]`, kept sorted by variable index with no
/// duplicate indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(index: usize) -> Self {
        LinExpr { terms: vec![(index, 1.0)], constant: 0.0 }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return LinExpr::zero();
        }
        LinExpr {
            terms: self.terms.iter().map(|&(i, c)| (i, c * s)).collect(),
            constant: self.constant * s,
        }
    }

    /// `self + s * other`, merging sorted term lists.
    pub fn add_scaled(&self, other: &LinExpr, s: f64) -> Self {
        if s == 0.0 {
            return self.clone();
        }
        let mut terms = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut a, mut b) = (self.terms.iter().peekable(), other.terms.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&(ia, ca)), Some(&&(ib, cb))) => {
                    if ia < ib {
                        terms.push((ia, ca));
                        a.next();
                    } else if ib < ia {
                        terms.push((ib, cb * s));
                        b.next();
                    } else {
                        let v = ca + cb * s;
                        if v != 0.0 {
                            terms.push((ia, v));
                        }
                        a.next();
                        b.next();
                    }
                }
                (Some(&&t), None) => {
                    terms.push(t);
                    a.next();
                }
                (None, Some(&&(ib, cb))) => {
                    terms.push((ib, cb * s));
                    b.next();
                }
                (None, None) => break,
            }
        }
        LinExpr { terms, constant: self.constant + other.constant * s }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        self.terms.last().map(|&(i, _)| i)
    }

    pub fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.terms.iter().all(|(_, c)| c.is_finite())
    }
}

impl Add<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn add(self, rhs: &LinExpr) -> LinExpr {
        self.add_scaled(rhs, 1.0)
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, 1.0)
    }
}

impl Add<f64> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: f64) -> LinExpr {
        self.constant += rhs;
        self
    }
}

impl Sub<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: &LinExpr) -> LinExpr {
        self.add_scaled(rhs, -1.0)
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, -1.0)
    }
}

impl Sub<f64> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: f64) -> LinExpr {
        self.constant -= rhs;
        self
    }
}

impl Mul<f64> for &LinExpr {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        self.scale(rhs)
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        self.scale(rhs)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scale(-1.0)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        *self = self.add_scaled(rhs, 1.0);
    }
}

/// Complex affine expression `re + i im`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CLinExpr {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl CLinExpr {
    pub fn zero() -> Self {
        CLinExpr::default()
    }

    pub fn real(re: LinExpr) -> Self {
        CLinExpr { re, im: LinExpr::zero() }
    }

    pub fn constant(c: Complex64) -> Self {
        CLinExpr { re: LinExpr::constant(c.re), im: LinExpr::constant(c.im) }
    }

    pub fn conj(&self) -> Self {
        CLinExpr { re: self.re.clone(), im: self.im.scale(-1.0) }
    }

    /// `self + c * other` for a complex constant `c`.
    pub fn add_scaled(&self, other: &CLinExpr, c: Complex64) -> Self {
        CLinExpr {
            re: self.re.add_scaled(&other.re, c.re).add_scaled(&other.im, -c.im),
            im: self.im.add_scaled(&other.im, c.re).add_scaled(&other.re, c.im),
        }
    }

    pub fn mul_const(&self, c: Complex64) -> Self {
        CLinExpr::zero().add_scaled(self, c)
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        Complex64::new(self.re.eval(x), self.im.eval(x))
    }
}

impl Add<&CLinExpr> for &CLinExpr {
    type Output = CLinExpr;
    fn add(self, rhs: &CLinExpr) -> CLinExpr {
        CLinExpr { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl Sub<&CLinExpr> for &CLinExpr {
    type Output = CLinExpr;
    fn sub(self, rhs: &CLinExpr) -> CLinExpr {
        CLinExpr { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

/// Dense matrix of complex affine expressions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatExpr {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<CLinExpr>,
}

impl CMatExpr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatExpr { rows, cols, entries: vec![CLinExpr::zero(); rows * cols] }
    }

    pub fn from_constant(m: &CMat) -> Self {
        let mut out = CMatExpr::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                *out.at_mut(i, j) = CLinExpr::constant(m[(i, j)]);
            }
        }
        out
    }

    pub fn at(&self, i: usize, j: usize) -> &CLinExpr {
        &self.entries[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut CLinExpr {
        &mut self.entries[i * self.cols + j]
    }

    pub fn add(&self, other: &CMatExpr) -> CMatExpr {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatExpr {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn neg(&self) -> CMatExpr {
        CMatExpr {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.mul_const(Complex64::new(-1.0, 0.0))).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> CMatExpr {
        CMatExpr {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .map(|e| CLinExpr { re: e.re.scale(s), im: e.im.scale(s) })
                .collect(),
        }
    }

    /// `self + d I` for a real affine `d`.
    pub fn add_diagonal(&self, d: &LinExpr) -> CMatExpr {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            let e = out.at_mut(i, i);
            e.re = &e.re + d;
        }
        out
    }

    /// `self * v` for a constant vector `v`.
    pub fn mul_vec(&self, v: &CVec) -> Vec<CLinExpr> {
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(CLinExpr::zero(), |acc, j| acc.add_scaled(self.at(i, j), v[j]))
            })
            .collect()
    }

    /// `v^H self v`, real part; exact for Hermitian expressions.
    pub fn quad_form(&self, v: &CVec) -> LinExpr {
        let sv = self.mul_vec(v);
        sv.iter()
            .enumerate()
            .fold(CLinExpr::zero(), |acc, (i, e)| acc.add_scaled(e, v[i].conj()))
            .re
    }

    /// `Tr(G self)` for a constant matrix `G`.
    pub fn trace_with(&self, g: &CMat) -> CLinExpr {
        let mut acc = CLinExpr::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                // Tr(G X) = sum_{i,j} G[j,i] X[i,j]
                let c = g[(j, i)];
                if c != Complex64::new(0.0, 0.0) {
                    acc = acc.add_scaled(self.at(i, j), c);
                }
            }
        }
        acc
    }

    pub fn eval(&self, x: &[f64]) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self.at(i, j).eval(x))
    }
}

/// Assemble a Hermitian block matrix `[[top_left, col], [col^H, corner]]`.
pub fn bordered(top_left: &CMatExpr, col: &[CLinExpr], corner: &LinExpr) -> CMatExpr {
    let n = top_left.rows;
    assert_eq!(col.len(), n);
    let mut out = CMatExpr::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            *out.at_mut(i, j) = top_left.at(i, j).clone();
        }
        *out.at_mut(i, n) = col[i].clone();
        *out.at_mut(n, i) = col[i].conj();
    }
    *out.at_mut(n, n) = CLinExpr::real(corner.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn merge_keeps_terms_sorted_and_cancels() {
        let a = LinExpr { terms: vec![(0, 1.0), (3, 2.0)], constant: 1.0 };
        let b = LinExpr { terms: vec![(1, 1.0), (3, 1.0)], constant: -0.5 };
        let s = a.add_scaled(&b, -2.0);
        assert_eq!(s.terms, vec![(0, 1.0), (1, -2.0)]);
        assert_eq!(s.constant, 2.0);
    }

    #[test]
    fn complex_scaling_matches_arithmetic() {
        let e = CLinExpr { re: LinExpr::var(0), im: LinExpr::var(1) };
        let x = [0.7, -1.3];
        let k = c(0.2, 2.5);
        let got = e.mul_const(k).eval(&x);
        let want = c(0.7, -1.3) * k;
        assert!((got - want).norm() < 1e-14);
    }

    #[test]
    fn quad_form_and_trace_match_numeric() {
        // Every entry is its own (re, im) variable pair.
        let n = 3;
        let mut m = CMatExpr::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let base = 2 * (i * n + j);
                *m.at_mut(i, j) = CLinExpr { re: LinExpr::var(base), im: LinExpr::var(base + 1) };
            }
        }
        let x: Vec<f64> = (0..2 * n * n).map(|i| (i as f64 * 0.37).sin()).collect();
        let numeric = m.eval(&x);
        let v = CVec::from_fn(n, |i, _| c(i as f64 - 1.0, 0.5));
        let g = CMat::from_fn(n, n, |i, j| c((i + 2 * j) as f64, i as f64 - j as f64));
        let tr = m.trace_with(&g).eval(&x);
        assert!((tr - (&g * &numeric).trace()).norm() < 1e-12);
        let mv = m.mul_vec(&v);
        let want = &numeric * &v;
        for i in 0..n {
            assert!((mv[i].eval(&x) - want[i]).norm() < 1e-12);
        }
    }
}
