// SPDX-License-Identifier: Apache-2.0

//! Solver-agnostic conic programs and the Clarabel backend.

mod embed;
mod expr;
mod lmi;
mod p3;
mod p5;
mod problem;
mod solver;

pub use embed::{embed_hermitian, HERMITIAN_TOL};
pub use expr::{bordered, CLinExpr, CMatExpr, LinExpr};
pub use lmi::{
    build_crb_lmi_21, build_interference_lmi_19, build_sinr_lmi_18, crb_lmi_expr, interference_lmi_expr,
    sinr_lmi_expr,
};
pub use p3::{build_p3, build_p3_with, P3Layout, P3Options, P3Values, P3};
pub use p5::{build_p5, build_p5_nearest, p5_closed_form, P5};
pub use problem::{unpack_upper, BlockKind, ConeKind, ConicProblem, Constraint, HermitianVar, VarBlock};
pub use solver::{
    constraint_violation, max_violation, solve, ClarabelSolver, SOLVER_ATTEMPTS, ConicSolution, ConicSolver, SolveStatus,
    SolverOptions,
};
