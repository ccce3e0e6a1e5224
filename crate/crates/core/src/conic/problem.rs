// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt::Write as _;


use super::expr::{CLinExpr, CMatExpr, LinExpr};
use crate::error::ConicError;
use crate::linalg::CMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Free,
    Nonneg,
    /// Hermitian `n x n` matrix constrained PSD; stored as `n^2` reals.
    HermitianPsd(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarBlock {
    pub name: String,
    pub kind: BlockKind,
    pub offset: usize,
    pub len: usize,
}

/// Handle to a Hermitian variable block.
///
/// Real layout: the `n` diagonal entries, then `(re, im)` pairs for the
/// strict upper triangle in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermitianVar {
    pub block: usize,
    pub offset: usize,
    pub n: usize,
}

impl HermitianVar {
    fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        // Number of strict-upper entries before row i, then column offset.
        let before = i * self.n - i * (i + 1) / 2;
        self.offset + self.n + 2 * (before + (j - i - 1))
    }

    pub fn entry(&self, i: usize, j: usize) -> CLinExpr {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => CLinExpr::real(LinExpr::var(self.offset + i)),
            Less => {
                let p = self.pair_index(i, j);
                CLinExpr { re: LinExpr::var(p), im: LinExpr::var(p + 1) }
            }
            Greater => self.entry(j, i).conj(),
        }
    }

    pub fn expr(&self) -> CMatExpr {
        let mut m = CMatExpr::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                *m.at_mut(i, j) = self.entry(i, j);
            }
        }
        m
    }

    pub fn trace(&self) -> LinExpr {
        (0..self.n).fold(LinExpr::zero(), |acc, i| acc + LinExpr::var(self.offset + i))
    }

    pub fn extract(&self, x: &[f64]) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.entry(i, j).eval(x))
    }

    /// Write a Hermitian matrix into the block's slots of `x`.
    pub fn store(&self, m: &CMat, x: &mut [f64]) {
        for i in 0..self.n {
            x[self.offset + i] = m[(i, i)].re;
            for j in (i + 1)..self.n {
                let p = self.pair_index(i, j);
                x[p] = m[(i, j)].re;
                x[p + 1] = m[(i, j)].im;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConeKind {
    /// `expr == 0`
    Zero,
    /// `expr >= 0`
    Nonneg,
    /// `||rows[1..]|| <= rows[0]`
    Soc,
    /// `(x, y, z)` with `y exp(x / y) <= z`, `y > 0`
    Exp,
    /// Real symmetric `n x n` PSD; rows hold the upper triangle column by
    /// column, unscaled.
    Psd(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub cone: ConeKind,
    pub rows: Vec<LinExpr>,
}

impl Constraint {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Side length of the Hermitian matrix this PSD constraint came from,
    /// when it was built through [`ConicProblem::add_hermitian_lmi`].
    pub fn psd_side(&self) -> Option<usize> {
        match self.cone {
            ConeKind::Psd(n) => Some(n),
            _ => None,
        }
    }
}

/// Real symmetric matrix from upper-triangle rows in column order.
pub fn unpack_upper(n: usize, values: &[f64]) -> nalgebra::DMatrix<f64> {
    let mut m = nalgebra::DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            m[(i, j)] = values[k];
            m[(j, i)] = values[k];
            k += 1;
        }
    }
    m
}

/// Maximization problem over real scalars arranged in named blocks.
#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    pub name: String,
    pub blocks: Vec<VarBlock>,
    pub objective: LinExpr,
    pub constraints: Vec<Constraint>,
    pub metadata: BTreeMap<String, String>,
    nvars: usize,
}

impl ConicProblem {
    pub fn new(name: impl Into<String>) -> Self {
        ConicProblem { name: name.into(), ..Default::default() }
    }

    pub fn num_vars(&self) -> usize {
        self.nvars
    }

    fn push_block(&mut self, name: &str, kind: BlockKind, len: usize) -> (usize, usize) {
        let offset = self.nvars;
        self.blocks.push(VarBlock { name: name.to_string(), kind, offset, len });
        self.nvars += len;
        (self.blocks.len() - 1, offset)
    }

    pub fn add_free(&mut self, name: &str, len: usize) -> Vec<LinExpr> {
        let (_, off) = self.push_block(name, BlockKind::Free, len);
        (off..off + len).map(LinExpr::var).collect()
    }

    /// Variables with an implied `>= 0` constraint.
    pub fn add_nonneg(&mut self, name: &str, len: usize) -> Vec<LinExpr> {
        let (_, off) = self.push_block(name, BlockKind::Nonneg, len);
        let vars: Vec<LinExpr> = (off..off + len).map(LinExpr::var).collect();
        if len == 0 {
            return vars;
        }
        self.constraints.push(Constraint {
            name: format!("{name}>=0"),
            cone: ConeKind::Nonneg,
            rows: vars.clone(),
        });
        vars
    }

    /// Hermitian PSD variable with its PSD constraint attached.
    pub fn add_hermitian_psd(&mut self, name: &str, n: usize) -> HermitianVar {
        let (block, offset) = self.push_block(name, BlockKind::HermitianPsd(n), n * n);
        let h = HermitianVar { block, offset, n };
        let e = h.expr();
        self.add_hermitian_lmi(&format!("{name}>=0"), &e)
            .expect("variable block is Hermitian by construction");
        h
    }

    pub fn block(&self, name: &str) -> Option<&VarBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn set_objective(&mut self, objective: LinExpr) {
        self.objective = objective;
    }

    pub fn add_constraint(&mut self, name: &str, cone: ConeKind, rows: Vec<LinExpr>) {
        self.constraints.push(Constraint { name: name.to_string(), cone, rows });
    }

    pub fn add_ge(&mut self, name: &str, lhs: LinExpr, rhs: LinExpr) {
        self.add_constraint(name, ConeKind::Nonneg, vec![lhs - rhs]);
    }

    pub fn add_le(&mut self, name: &str, lhs: LinExpr, rhs: LinExpr) {
        self.add_constraint(name, ConeKind::Nonneg, vec![rhs - lhs]);
    }

    pub fn add_eq(&mut self, name: &str, lhs: LinExpr, rhs: LinExpr) {
        self.add_constraint(name, ConeKind::Zero, vec![lhs - rhs]);
    }

    /// `||x|| <= t`
    pub fn add_soc(&mut self, name: &str, t: LinExpr, x: Vec<LinExpr>) {
        let mut rows = Vec::with_capacity(x.len() + 1);
        rows.push(t);
        rows.extend(x);
        self.add_constraint(name, ConeKind::Soc, rows);
    }

    /// `y exp(x / y) <= z`
    pub fn add_exp(&mut self, name: &str, x: LinExpr, y: LinExpr, z: LinExpr) {
        self.add_constraint(name, ConeKind::Exp, vec![x, y, z]);
    }

    /// Complex Hermitian LMI `M(x) >= 0`, lowered through the real embedding
    /// `[[Re M, -Im M], [Im M, Re M]]`.
    pub fn add_hermitian_lmi(&mut self, name: &str, m: &CMatExpr) -> Result<(), ConicError> {
        if m.rows != m.cols {
            return Err(ConicError::Dimension(format!(
                "{name}: LMI must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        let n = m.rows;
        for i in 0..n {
            for j in i..n {
                let a = m.at(i, j);
                let b = m.at(j, i).conj();
                if a.re != b.re || a.im != b.im {
                    return Err(ConicError::NotHermitian(format!("{name}: entry ({i},{j})")));
                }
            }
            if !m.at(i, i).im.terms.is_empty() || m.at(i, i).im.constant != 0.0 {
                return Err(ConicError::NotHermitian(format!("{name}: diagonal ({i},{i})")));
            }
        }
        let size = 2 * n;
        let mut rows = Vec::with_capacity(size * (size + 1) / 2);
        for q in 0..size {
            for p in 0..=q {
                let e = match (p < n, q < n) {
                    (true, true) => m.at(p, q).re.clone(),
                    (true, false) => m.at(p, q - n).im.scale(-1.0),
                    (false, false) => m.at(p - n, q - n).re.clone(),
                    (false, true) => unreachable!("p <= q"),
                };
                if !e.is_finite() {
                    return Err(ConicError::NonFinite(format!("{name}: entry ({p},{q})")));
                }
                rows.push(e);
            }
        }
        self.add_constraint(name, ConeKind::Psd(size), rows);
        Ok(())
    }

    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.name == name)
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let check = |e: &LinExpr, what: &str| -> Result<(), ConicError> {
            if !e.is_finite() {
                return Err(ConicError::NonFinite(what.to_string()));
            }
            if e.max_var().is_some_and(|v| v >= self.nvars) {
                return Err(ConicError::Malformed(format!("{what}: variable out of range")));
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for c in &self.constraints {
            let expected = match c.cone {
                ConeKind::Exp => Some(3),
                ConeKind::Psd(n) => Some(n * (n + 1) / 2),
                _ => None,
            };
            if expected.is_some_and(|d| d != c.rows.len()) || c.rows.is_empty() {
                return Err(ConicError::Malformed(format!("{}: wrong row count", c.name)));
            }
            for r in &c.rows {
                check(r, &c.name)?;
            }
        }
        Ok(())
    }

    /// Plain-text rendering: blocks, objective and every constraint row as
    /// `(var, coef)` pairs plus a constant.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "problem {}", self.name);
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "meta {k} = {v}");
        }
        let _ = writeln!(s, "vars {}", self.nvars);
        for b in &self.blocks {
            let _ = writeln!(s, "block {} {:?} offset={} len={}", b.name, b.kind, b.offset, b.len);
        }
        let _ = writeln!(s, "maximize");
        write_row(&mut s, 0, &self.objective);
        for c in &self.constraints {
            let _ = writeln!(s, "constraint {} {:?} dim={}", c.name, c.cone, c.rows.len());
            for (i, r) in c.rows.iter().enumerate() {
                write_row(&mut s, i, r);
            }
        }
        s
    }
}

fn write_row(s: &mut String, i: usize, e: &LinExpr) {
    let _ = write!(s, "  {i}: {:e}", e.constant);
    for &(v, coef) in &e.terms {
        let _ = write!(s, " ({v},{coef:e})");
    }
    s.push('\n');
}
