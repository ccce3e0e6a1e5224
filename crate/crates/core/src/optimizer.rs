// SPDX-License-Identifier: Apache-2.0

//! Alternating fractional-programming loop: beamforming program, rank-one
//! extraction, `q` update, combiner update, repeat until the energy
//! efficiency settles.

use std::fmt;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{build_steering_context, ChannelSet};
use crate::config::{ConvergenceRule, SystemConfig};
use crate::conic::{build_p3, build_p3_with, build_p5, build_p5_nearest, ConicSolver, P3Options, SolveStatus};
use crate::linalg::{self, CMat, CVec};
use crate::metrics::{self, BeamformerSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FPState {
    pub iteration: usize,
    pub q: Vec<f64>,
    pub z: Vec<CVec>,
    /// Combiners the most recent beamforming program was built with.
    pub z_p3: Vec<CVec>,
    pub beams: BeamformerSet,
    pub r: Vec<f64>,
    pub eps: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    /// Surrogate objective reported by each beamforming solve.
    pub ee_trace: Vec<f64>,
    /// System EE of the extracted rank-one beamformers, per iteration.
    pub true_ee_trace: Vec<f64>,
    /// System EE of the initialization; the first stopping test compares
    /// against it.
    pub ee_init: f64,
    pub converged: bool,
}

impl FPState {
    pub fn last_ee(&self) -> f64 {
        self.ee_trace.last().copied().unwrap_or(self.ee_init)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIters,
    Infeasible,
    SolverFailure,
    NonMonotone,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIters => "max_iters",
            RunStatus::Infeasible => "infeasible",
            RunStatus::SolverFailure => "solver_failure",
            RunStatus::NonMonotone => "non_monotone",
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub p3_seconds: f64,
    pub p5_seconds: f64,
    pub other_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub ee_surrogate: f64,
    pub ee_true: f64,
    /// `fp_objective` after the `q` update minus before it.
    pub q_step_gain: f64,
    pub p3_iterations: u32,
    pub p3_max_violation: f64,
    /// Users whose combiner update failed and kept the previous `z`.
    pub p5_failures: Vec<usize>,
    pub rank_ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub state: FPState,
    pub status: RunStatus,
    pub timing: Timing,
    pub records: Vec<IterationRecord>,
    /// Human-readable reason for a failed run, with the iteration.
    pub failure: Option<String>,
    /// Constraint family blamed for an infeasible beamforming program.
    pub infeasible_family: Option<String>,
    /// True when the isotropic fallback start was used.
    pub isotropic_start: bool,
}

impl RunResult {
    pub fn iterations(&self) -> usize {
        self.state.iteration
    }

    pub fn succeeded(&self) -> bool {
        matches!(self.status, RunStatus::Converged | RunStatus::MaxIters)
    }
}

/// Failure of one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum StepError {
    Infeasible { iteration: usize, family: String },
    Solver { iteration: usize, detail: String },
}

impl fmt::Display for StepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepError::Infeasible { iteration, family } => {
                write!(f, "beamforming program infeasible at iteration {iteration} ({family})")
            }
            StepError::Solver { iteration, detail } => write!(f, "solver failure at iteration {iteration}: {detail}"),
        }
    }
}

/// Dominant eigenpair as a beamformer, `sqrt(l1) u1`, with the phase chosen
/// so the largest-modulus entry is real and nonnegative (lowest index wins
/// ties).
pub fn evd_extract(w: &CMat) -> CVec {
    let n = w.nrows();
    if n == 0 {
        return CVec::zeros(0);
    }
    let (values, vectors) = linalg::hermitian_eigen(w);
    let mut u: CVec = vectors.column(0).into_owned();
    let biggest = u.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if biggest > 0.0 {
        let pivot = u.iter().position(|x| x.norm() >= biggest * (1.0 - 1e-12)).unwrap_or(0);
        let phase = u[pivot].conj() / u[pivot].norm();
        u *= phase;
        // Exact zero on the pivot's imaginary part.
        u[pivot] = Complex64::new(u[pivot].norm(), 0.0);
    }
    u * Complex64::new(values[0].max(0.0).sqrt(), 0.0)
}

fn rank_ratio(w: &CMat) -> f64 {
    let ev = linalg::hermitian_eigenvalues(w);
    if ev.len() < 2 || ev[0] <= 0.0 {
        return 0.0;
    }
    ev[1].max(0.0) / ev[0]
}

fn per_user_init_power(cfg: &SystemConfig) -> f64 {
    cfg.p_max.min(cfg.fixed_power_share())
}

fn state_from_beams(cfg: &SystemConfig, channels: &ChannelSet, beams: BeamformerSet) -> FPState {
    let k_users = cfg.users;
    let rates = metrics::nominal_rates(channels, &beams, cfg.sigma_m2).unwrap_or_else(|_| vec![0.0; k_users]);
    let q = (0..k_users).map(|k| metrics::optimal_q(rates[k], &beams.w_mats[k], cfg)).collect();
    let z: Vec<CVec> = (0..k_users)
        .map(|k| {
            metrics::optimal_z_nominal(&channels.h_hat[k], &beams, k, cfg.sigma_m2)
                .unwrap_or_else(|_| CVec::zeros(cfg.rx_antennas))
        })
        .collect();
    let ee_init = metrics::system_ee(&rates, &beams, cfg);
    FPState {
        iteration: 0,
        q,
        z_p3: z.clone(),
        z,
        beams,
        r: vec![0.0; k_users],
        eps: vec![0.0; k_users],
        v: vec![0.0; k_users],
        lambda1: vec![0.0; k_users],
        lambda2: vec![0.0; k_users],
        ee_trace: Vec::new(),
        true_ee_trace: Vec::new(),
        ee_init,
        converged: false,
    }
}

/// Dominant-right-singular-vector start with equal per-user power. Users
/// with an all-zero channel get the isotropic covariance instead.
pub fn initialize(cfg: &SystemConfig, channels: &ChannelSet) -> FPState {
    let p = per_user_init_power(cfg);
    let m_t = cfg.tx_antennas;
    let w_mats: Vec<CMat> = channels
        .h_hat
        .iter()
        .map(|h| {
            let (s, v) = linalg::dominant_right_singular(h);
            if s > 0.0 {
                linalg::outer(&v) * Complex64::new(p / linalg::norm_sq(&v), 0.0)
            } else {
                isotropic(m_t, p)
            }
        })
        .collect();
    state_from_beams(cfg, channels, with_vectors(w_mats))
}

/// Start from `W_k = (P_init / M_t) I` for every user.
pub fn initialize_isotropic(cfg: &SystemConfig, channels: &ChannelSet) -> FPState {
    let p = per_user_init_power(cfg);
    let w_mats = (0..cfg.users).map(|_| isotropic(cfg.tx_antennas, p)).collect();
    state_from_beams(cfg, channels, with_vectors(w_mats))
}

fn isotropic(m_t: usize, power: f64) -> CMat {
    CMat::identity(m_t, m_t) * Complex64::new(power / m_t as f64, 0.0)
}

fn with_vectors(w_mats: Vec<CMat>) -> BeamformerSet {
    let vectors = w_mats.iter().map(evd_extract).collect();
    BeamformerSet { w_mats, vectors: Some(vectors) }
}

/// Re-solve without constraint families until the program becomes feasible,
/// and name the first family whose removal helped.
fn probe_infeasibility(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    state: &FPState,
    solver: &dyn ConicSolver,
) -> String {
    let attempts = [
        ("crb", P3Options { crb: false, sinr_floor: true }),
        ("sinr_floor", P3Options { crb: true, sinr_floor: false }),
        ("crb+sinr_floor", P3Options { crb: false, sinr_floor: false }),
    ];
    for (name, opts) in attempts {
        if let Ok(p3) = build_p3_with(cfg, channels, &state.q, &state.z, opts) {
            if solver.solve(&p3.problem).status == SolveStatus::Optimal {
                return name.to_string();
            }
        }
    }
    "power+robust".to_string()
}

/// One pass of the loop. On success returns the per-iteration record and
/// the time spent in each stage.
pub fn iterate_once(
    state: &mut FPState,
    cfg: &SystemConfig,
    channels: &ChannelSet,
    solver: &dyn ConicSolver,
    timing: &mut Timing,
) -> Result<IterationRecord, StepError> {
    let iteration = state.iteration + 1;
    let t0 = Instant::now();
    let p3 = build_p3(cfg, channels, &state.q, &state.z)
        .map_err(|e| StepError::Solver { iteration, detail: e.to_string() })?;
    let sol = solver.solve(&p3.problem);
    timing.p3_seconds += t0.elapsed().as_secs_f64();
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            return Err(StepError::Infeasible { iteration, family: probe_infeasibility(cfg, channels, state, solver) })
        }
        other => {
            return Err(StepError::Solver {
                iteration,
                detail: format!(
                    "{other} (backend {}, violation {:e} in {:?})",
                    sol.backend_status, sol.max_violation, sol.worst_constraint
                ),
            })
        }
    }

    let t1 = Instant::now();
    let vals = p3.extract(&sol.x);
    let vectors: Vec<CVec> = vals.w.iter().map(evd_extract).collect();
    let beams = BeamformerSet { w_mats: vals.w.clone(), vectors: Some(vectors) };
    let surrogate_rates: Vec<f64> = vals.r.iter().map(|&r| metrics::rate(r.max(0.0))).collect();
    let before = metrics::fp_objective(&state.q, &surrogate_rates, &beams, cfg).unwrap_or(f64::NAN);
    let q: Vec<f64> = (0..cfg.users).map(|k| metrics::optimal_q(surrogate_rates[k], &vals.w[k], cfg)).collect();
    let after = metrics::fp_objective(&q, &surrogate_rates, &beams, cfg).unwrap_or(f64::NAN);
    let ee_true = metrics::nominal_ee(channels, &beams, cfg).unwrap_or(f64::NAN);
    let rank_ratios = vals.w.iter().map(rank_ratio).collect();
    timing.other_seconds += t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let vectors = beams.vectors().expect("populated above");
    let mut z = state.z.clone();
    let mut p5_failures = Vec::new();
    for k in 0..cfg.users {
        let anchor = metrics::optimal_z_nominal(&channels.h_hat[k], &beams, k, cfg.sigma_m2)
            .unwrap_or_else(|_| state.z[k].clone());
        match update_combiner(channels.phi[k], &channels.h_hat[k], &vectors[k], vals.r[k], &anchor, solver) {
            Some(zk) => z[k] = zk,
            None => p5_failures.push(k),
        }
    }
    timing.p5_seconds += t2.elapsed().as_secs_f64();

    state.iteration = iteration;
    state.q = q;
    state.z_p3 = std::mem::replace(&mut state.z, z);
    state.beams = beams;
    state.r = vals.r;
    state.eps = vals.eps;
    state.v = vals.v;
    state.lambda1 = vals.lambda1.iter().map(|x| x.max(0.0)).collect();
    state.lambda2 = vals.lambda2.iter().map(|x| x.max(0.0)).collect();
    state.ee_trace.push(vals.objective);
    state.true_ee_trace.push(ee_true);

    Ok(IterationRecord {
        iteration,
        ee_surrogate: vals.objective,
        ee_true,
        q_step_gain: after - before,
        p3_iterations: sol.iterations,
        p3_max_violation: sol.max_violation,
        p5_failures,
        rank_ratios,
    })
}

/// Combiner update for one user; `None` when the program fails. Without
/// channel error the optimum is not unique, and the optimal point nearest
/// `anchor` is returned.
pub fn update_combiner(
    phi: f64,
    h: &CMat,
    w: &CVec,
    r: f64,
    anchor: &CVec,
    solver: &dyn ConicSolver,
) -> Option<CVec> {
    let p5 = build_p5(phi, h, w, r).ok()?;
    let sol = solver.solve(&p5.problem);
    if !sol.is_optimal() {
        return None;
    }
    if phi > 0.0 {
        return Some(p5.extract_z(&sol.x));
    }
    let mn = build_p5_nearest(h, w, r, sol.objective, anchor).ok()?;
    let sol2 = solver.solve(&mn.problem);
    sol2.is_optimal().then(|| mn.extract_z(&sol2.x))
}

fn has_converged(cfg: &SystemConfig, current: f64, previous: f64) -> bool {
    let delta = (current - previous).abs();
    match cfg.convergence {
        ConvergenceRule::Relative => delta < cfg.p_con * current.abs().max(1.0),
        ConvergenceRule::Absolute => delta < cfg.p_con,
    }
}

type Outcome = (RunStatus, Option<String>, Option<String>);

/// Run the loop to convergence or `max_iters`.
pub fn run(cfg: &SystemConfig, channels: &ChannelSet, solver: &dyn ConicSolver) -> RunResult {
    let start = Instant::now();
    let mut timing = Timing::default();
    let mut state = initialize(cfg, channels);
    let mut records = Vec::new();
    let mut isotropic_start = false;
    let (status, failure, infeasible_family) =
        drive(&mut state, cfg, channels, solver, &mut timing, &mut records, &mut isotropic_start);
    timing.total_seconds = start.elapsed().as_secs_f64();
    RunResult { state, status, timing, records, failure, infeasible_family, isotropic_start }
}

fn drive(
    state: &mut FPState,
    cfg: &SystemConfig,
    channels: &ChannelSet,
    solver: &dyn ConicSolver,
    timing: &mut Timing,
    records: &mut Vec<IterationRecord>,
    isotropic_start: &mut bool,
) -> Outcome {
    while state.iteration < cfg.max_iters {
        let previous = state.last_ee();
        let step = match iterate_once(state, cfg, channels, solver, timing) {
            Err(StepError::Infeasible { iteration: 1, .. }) if !*isotropic_start => {
                *isotropic_start = true;
                *state = initialize_isotropic(cfg, channels);
                let retry_prev = state.last_ee();
                iterate_once(state, cfg, channels, solver, timing).map(|r| (r, retry_prev))
            }
            other => other.map(|r| (r, previous)),
        };
        let (record, previous) = match step {
            Ok(x) => x,
            Err(StepError::Infeasible { iteration, family }) => {
                let msg = StepError::Infeasible { iteration, family: family.clone() }.to_string();
                return (RunStatus::Infeasible, Some(msg), Some(family));
            }
            Err(e) => return (RunStatus::SolverFailure, Some(e.to_string()), None),
        };
        let current = record.ee_surrogate;
        records.push(record);
        if state.ee_trace.len() >= 2 && current < previous - 0.01 * previous.abs() {
            let msg = format!("EE dropped from {previous} to {current} at iteration {}", state.iteration);
            return (RunStatus::NonMonotone, Some(msg), None);
        }
        if has_converged(cfg, current, previous) {
            state.converged = true;
            return (RunStatus::Converged, None, None);
        }
    }
    (RunStatus::MaxIters, None, None)
}

/// CRB of the final covariance, when the geometry is identifiable.
pub fn achieved_crb(cfg: &SystemConfig, beams: &BeamformerSet) -> Option<f64> {
    let ctx = build_steering_context(cfg);
    metrics::crb_theta(&ctx, &beams.covariance(), cfg.alpha, cfg.frame_len, cfg.sigma_s2).ok()
}
