// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use super::problem::{unpack_upper, ConeKind, ConicProblem, Constraint};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical_failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Status string reported by the backend before our own checks.
    pub backend_status: String,
    pub x: Vec<f64>,
    /// Objective of the maximization, evaluated at `x`.
    pub objective: f64,
    pub gap_rel: f64,
    pub max_violation: f64,
    pub worst_constraint: Option<String>,
    pub iterations: u32,
    pub solve_seconds: f64,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Largest absolute constraint violation accepted in a returned point.
    pub feas_tol: f64,
    /// Largest relative duality gap accepted.
    pub gap_tol: f64,
    pub backend_tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { feas_tol: 1e-7, gap_tol: 1e-6, backend_tol: 1e-9, max_iter: 200, verbose: false }
    }
}

pub trait ConicSolver {
    fn solve(&self, problem: &ConicProblem) -> ConicSolution;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelSolver {
    pub options: SolverOptions,
}

impl ClarabelSolver {
    pub fn new(options: SolverOptions) -> Self {
        ClarabelSolver { options }
    }

    /// Backend settings for one attempt. Later attempts change the linear
    /// solver, the scaling and the step length, which rescues most stalled
    /// interior-point runs.
    fn settings(&self, attempt: usize) -> DefaultSettings<f64> {
        let o = &self.options;
        let mut b = DefaultSettingsBuilder::default();
        b.verbose(o.verbose)
            .max_iter(o.max_iter)
            .tol_feas(o.backend_tol)
            .tol_gap_abs(o.backend_tol)
            .tol_gap_rel(o.backend_tol)
            .max_threads(1)
            .direct_solve_method("faer".to_string())
            .chordal_decomposition_enable(false);
        match attempt {
            0 => {}
            1 => {
                b.equilibrate_max_iter(100);
            }
            2 => {
                b.max_step_fraction(0.9);
            }
            3 => {
                b.max_step_fraction(0.8).static_regularization_constant(1e-7);
            }
            4 => {
                b.direct_solve_method("qdldl".to_string());
            }
            _ => {
                b.static_regularization_constant(1e-6).iterative_refinement_max_iter(50);
            }
        }
        b.build().expect("static settings are valid")
    }
}

/// Number of backend settings profiles tried before giving up.
pub const SOLVER_ATTEMPTS: usize = 6;

/// Solve with default options.
pub fn solve(problem: &ConicProblem) -> ConicSolution {
    ClarabelSolver::default().solve(problem)
}

pub fn constraint_violation(c: &Constraint, x: &[f64]) -> f64 {
    let v: Vec<f64> = c.rows.iter().map(|r| r.eval(x)).collect();
    match c.cone {
        ConeKind::Zero => v.iter().fold(0.0, |m, e| m.max(e.abs())),
        ConeKind::Nonneg => v.iter().fold(0.0, |m, e| m.max(-e)),
        ConeKind::Soc => {
            let tail = v[1..].iter().map(|e| e * e).sum::<f64>().sqrt();
            (tail - v[0]).max(0.0)
        }
        ConeKind::Exp => {
            let (a, y, z) = (v[0], v[1], v[2]);
            if y > 0.0 {
                (y * (a / y).exp() - z).max(0.0)
            } else {
                a.max(0.0).max(-z).max(-y)
            }
        }
        ConeKind::Psd(n) => {
            let m = unpack_upper(n, &v);
            (-linalg::min_eigenvalue_symmetric(&m)).max(0.0)
        }
    }
}

/// Worst violation over all constraints and the constraint that attains it.
pub fn max_violation(problem: &ConicProblem, x: &[f64]) -> (f64, Option<String>) {
    problem.constraints.iter().fold((0.0, None), |(m, who), c| {
        let v = constraint_violation(c, x);
        if v > m || v.is_nan() {
            (v, Some(c.name.clone()))
        } else {
            (m, who)
        }
    })
}

/// Clarabel standard form `min q'x  s.t.  s = b - A x`, `s` in the cone list.
struct StandardForm {
    q: Vec<f64>,
    a: CscMatrix<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

fn lower(problem: &ConicProblem) -> StandardForm {
    let n = problem.num_vars();
    let mut q = vec![0.0; n];
    for &(i, c) in &problem.objective.terms {
        q[i] -= c;
    }
    let (mut ri, mut cj, mut vals, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut cones = Vec::with_capacity(problem.constraints.len());
    let sqrt2 = std::f64::consts::SQRT_2;
    for c in &problem.constraints {
        let mut push_row = |e: &super::LinExpr, scale: f64| {
            let r = b.len();
            for &(j, coef) in &e.terms {
                ri.push(r);
                cj.push(j);
                vals.push(-coef * scale);
            }
            b.push(e.constant * scale);
        };
        match c.cone {
            ConeKind::Psd(side) => {
                let mut k = 0;
                for col in 0..side {
                    for row in 0..=col {
                        push_row(&c.rows[k], if row == col { 1.0 } else { sqrt2 });
                        k += 1;
                    }
                }
            }
            _ => c.rows.iter().for_each(|e| push_row(e, 1.0)),
        }
        cones.push(match c.cone {
            ConeKind::Zero => SupportedConeT::ZeroConeT(c.dim()),
            ConeKind::Nonneg => SupportedConeT::NonnegativeConeT(c.dim()),
            ConeKind::Soc => SupportedConeT::SecondOrderConeT(c.dim()),
            ConeKind::Exp => SupportedConeT::ExponentialConeT(),
            ConeKind::Psd(side) => SupportedConeT::PSDTriangleConeT(side),
        });
    }
    let a = CscMatrix::new_from_triplets(b.len(), n, ri, cj, vals);
    StandardForm { q, a, b, cones }
}

impl ConicSolver for ClarabelSolver {
    fn solve(&self, problem: &ConicProblem) -> ConicSolution {
        let start = Instant::now();
        let n = problem.num_vars();
        let failed = |msg: String| ConicSolution {
            status: SolveStatus::NumericalFailure,
            backend_status: msg,
            x: vec![f64::NAN; n],
            objective: f64::NAN,
            gap_rel: f64::NAN,
            max_violation: f64::INFINITY,
            worst_constraint: None,
            iterations: 0,
            solve_seconds: start.elapsed().as_secs_f64(),
        };
        if let Err(e) = problem.validate() {
            return failed(format!("rejected: {e}"));
        }
        let sf = lower(problem);
        let mut best: Option<ConicSolution> = None;
        for attempt in 0..SOLVER_ATTEMPTS {
            let mut sol = match self.attempt(problem, &sf, attempt) {
                Ok(sol) => sol,
                Err(msg) => failed(msg),
            };
            sol.solve_seconds = start.elapsed().as_secs_f64();
            if sol.status != SolveStatus::NumericalFailure {
                return sol;
            }
            if best.as_ref().map_or(true, |b| sol.max_violation < b.max_violation) {
                best = Some(sol);
            }
        }
        best.expect("at least one attempt")
    }
}

impl ClarabelSolver {
    fn attempt(&self, problem: &ConicProblem, sf: &StandardForm, attempt: usize) -> Result<ConicSolution, String> {
        let n = problem.num_vars();
        let p = CscMatrix::zeros((n, n));
        let mut solver = DefaultSolver::new(&p, &sf.q, &sf.a, &sf.b, &sf.cones, self.settings(attempt))
            .map_err(|e| format!("setup: {e:?}"))?;
        solver.solve();
        let sol = &solver.solution;
        let x = sol.x.clone();
        let gap_rel = solver.info.gap_rel;
        let (viol, worst) = max_violation(problem, &x);
        let objective = problem.objective.eval(&x);
        let usable = viol <= self.options.feas_tol
            && viol.is_finite()
            && (gap_rel <= self.options.gap_tol || solver.info.gap_abs <= self.options.gap_tol)
            && objective.is_finite();
        let status = match sol.status {
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            _ if usable => SolveStatus::Optimal,
            _ => SolveStatus::NumericalFailure,
        };
        Ok(ConicSolution {
            status,
            backend_status: format!("{:?}", sol.status),
            x,
            objective,
            gap_rel,
            max_violation: viol,
            worst_constraint: worst,
            iterations: sol.iterations,
            solve_seconds: 0.0,
        })
    }
}
