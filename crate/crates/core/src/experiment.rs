// SPDX-License-Identifier: Apache-2.0

//! Seeded sweeps over antenna count, root-CRB and error radius, with CSV and
//! JSON output.
//!
//! Every cell `(sweep_value, seed)` is independent: it regenerates its own
//! channels from the seed, runs the optimizer, and audits the result. Cells
//! run on the rayon pool and rows come back ordered by grid position, then
//! seed.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::generate_channels;
use crate::config::SystemConfig;
use crate::conic::ClarabelSolver;
use crate::error::ExperimentError;
use crate::optimizer::{achieved_crb, run, RunStatus};
use crate::rng::Rng;
use crate::verification::{rank_one_ratio, robust_sinr_check};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Grid over `M_t`.
    Convergence,
    /// Grid over root-CRB `sqrt(rho)`.
    CrbSweep,
    /// Grid over the error radius `phi`.
    PhiSweep,
}

impl SweepKind {
    /// Grid used when the caller gives none.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepKind::Convergence => vec![6.0, 8.0, 10.0, 12.0, 14.0],
            SweepKind::CrbSweep => vec![0.002, 0.0033, 0.006, 0.01],
            SweepKind::PhiSweep => (1..=10).map(|i| i as f64 / 20.0).collect(),
        }
    }

    /// Default error radius for this kind of sweep.
    pub fn default_phi(self) -> f64 {
        match self {
            SweepKind::CrbSweep => 0.3,
            SweepKind::Convergence | SweepKind::PhiSweep => 0.1,
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepKind::Convergence => "convergence",
            SweepKind::CrbSweep => "crb_sweep",
            SweepKind::PhiSweep => "phi_sweep",
        })
    }
}

fn default_robust_samples() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub base: SystemConfig,
    /// Error draws per user in the robustness audit of converged cells;
    /// zero skips the audit.
    #[serde(default = "default_robust_samples")]
    pub robust_samples: usize,
}

impl SweepSpec {
    pub fn new(kind: SweepKind, grid: Vec<f64>, seeds: Vec<u64>, base: SystemConfig) -> Self {
        SweepSpec { kind, grid, seeds, base, robust_samples: default_robust_samples() }
    }

    pub fn from_json_str(text: &str) -> Result<Self, ExperimentError> {
        let spec: SweepSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidSweep(m));
        if self.grid.is_empty() {
            return bad("empty grid".into());
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        for &g in &self.grid {
            let ok = match self.kind {
                SweepKind::Convergence => g >= 1.0 && g.fract() == 0.0,
                SweepKind::CrbSweep => g > 0.0,
                SweepKind::PhiSweep => g >= 0.0 && g.is_finite(),
            };
            if !ok {
                return bad(format!("grid value {g} is not valid for {}", self.kind));
            }
        }
        for &g in &self.grid {
            self.cell_config(g, self.seeds[0]).validate()?;
        }
        Ok(())
    }

    /// Configuration of the cell at `value`, seeded with `seed`.
    pub fn cell_config(&self, value: f64, seed: u64) -> SystemConfig {
        let base = self.base.clone();
        let mut cfg = match self.kind {
            SweepKind::Convergence => base.with_tx_antennas(value as usize),
            SweepKind::CrbSweep => base.with_root_crb(value),
            SweepKind::PhiSweep => base.with_phi(value),
        };
        cfg.seed = seed;
        cfg
    }

    pub fn cells(&self) -> Vec<(f64, u64)> {
        self.grid.iter().flat_map(|&g| self.seeds.iter().map(move |&s| (g, s))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub seed: u64,
    pub iterations: usize,
    /// Last beamforming objective; `None` when no iteration finished.
    pub ee_final: Option<f64>,
    /// Objective per iteration, convergence sweeps only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ee_trace: Option<Vec<f64>>,
    pub crb_achieved: Option<f64>,
    /// Minimum over users of the worst sampled SINR.
    pub min_robust_sinr: Option<f64>,
    pub max_rank_ratio: Option<f64>,
    pub status: RunStatus,
    pub wall_ms: f64,
}

impl SweepRow {
    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }
}

/// One cell of a sweep, independent of every other cell.
pub fn run_cell(spec: &SweepSpec, value: f64, seed: u64) -> SweepRow {
    let start = Instant::now();
    let cfg = spec.cell_config(value, seed);
    let channels = generate_channels(&cfg, &mut Rng::new(seed));
    let res = run(&cfg, &channels, &ClarabelSolver::default());
    let beams = &res.state.beams;
    let ran = res.state.iteration > 0;
    let max_rank_ratio = if ran {
        let ratios: Option<Vec<f64>> = beams.w_mats.iter().map(|w| rank_one_ratio(w).ok()).collect();
        ratios.map(|v| v.into_iter().fold(0.0, f64::max))
    } else {
        None
    };
    let min_robust_sinr = if res.status == RunStatus::Converged && spec.robust_samples > 0 {
        let mut rng = Rng::new(seed).stream(1);
        robust_sinr_check(beams, &channels, &cfg, spec.robust_samples, &mut rng)
            .ok()
            .map(|v| v.into_iter().fold(f64::INFINITY, f64::min))
    } else {
        None
    };
    SweepRow {
        sweep_value: value,
        seed,
        iterations: res.state.iteration,
        ee_final: res.state.ee_trace.last().copied(),
        ee_trace: (spec.kind == SweepKind::Convergence).then(|| res.state.ee_trace.clone()),
        crb_achieved: if ran { achieved_crb(&cfg, beams) } else { None },
        min_robust_sinr,
        max_rank_ratio,
        status: res.status,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// Run every cell of `spec`, whatever its kind.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, ExperimentError> {
    spec.validate()?;
    Ok(spec.cells().into_par_iter().map(|(g, s)| run_cell(spec, g, s)).collect())
}

fn expect_kind(spec: &SweepSpec, kind: SweepKind) -> Result<(), ExperimentError> {
    if spec.kind != kind {
        return Err(ExperimentError::InvalidSweep(format!("expected a {kind} spec, got {}", spec.kind)));
    }
    Ok(())
}

pub fn run_convergence(spec: &SweepSpec) -> Result<Vec<SweepRow>, ExperimentError> {
    expect_kind(spec, SweepKind::Convergence)?;
    run_sweep(spec)
}

pub fn run_crb_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, ExperimentError> {
    expect_kind(spec, SweepKind::CrbSweep)?;
    run_sweep(spec)
}

pub fn run_phi_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, ExperimentError> {
    expect_kind(spec, SweepKind::PhiSweep)?;
    run_sweep(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

pub const CSV_HEADER: [&str; 9] = [
    "sweep_value",
    "seed",
    "iterations",
    "ee_final",
    "crb_achieved",
    "min_robust_sinr",
    "max_rank_ratio",
    "status",
    "wall_ms",
];

/// Shortest round-trip text, in exponent form for very small or large
/// magnitudes.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>, ExperimentError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| ExperimentError::InvalidSweep(format!("bad number `{s}`")))
}

/// Write rows as CSV or JSON. The CSV gains a trailing `ee_trace` column,
/// semicolon-joined, when the rows carry traces.
pub fn write_rows<W: Write>(rows: &[SweepRow], out: W, format: OutputFormat) -> Result<(), ExperimentError> {
    if rows.is_empty() {
        return Err(ExperimentError::EmptyRows);
    }
    match format {
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
        OutputFormat::Csv => {
            let traces = rows.iter().all(|r| r.ee_trace.is_some());
            let mut w = csv::Writer::from_writer(out);
            let mut header: Vec<&str> = CSV_HEADER.to_vec();
            if traces {
                header.push("ee_trace");
            }
            w.write_record(&header)?;
            for r in rows {
                let mut rec = vec![
                    num(r.sweep_value),
                    r.seed.to_string(),
                    r.iterations.to_string(),
                    opt(r.ee_final),
                    opt(r.crb_achieved),
                    opt(r.min_robust_sinr),
                    opt(r.max_rank_ratio),
                    r.status.to_string(),
                    format!("{:.3}", r.wall_ms),
                ];
                if traces {
                    let t = r.ee_trace.as_deref().unwrap_or_default();
                    rec.push(t.iter().map(|&x| num(x)).collect::<Vec<_>>().join(";"));
                }
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn emit(rows: &[SweepRow], path: impl AsRef<Path>, format: OutputFormat) -> Result<(), ExperimentError> {
    if rows.is_empty() {
        return Err(ExperimentError::EmptyRows);
    }
    let file = BufWriter::new(File::create(path)?);
    write_rows(rows, file, format)
}

fn parse_status(s: &str) -> Result<RunStatus, ExperimentError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| ExperimentError::InvalidSweep(format!("unknown status `{s}`")))
}

/// Read rows written by [`emit`].
pub fn load(path: impl AsRef<Path>, format: OutputFormat) -> Result<Vec<SweepRow>, ExperimentError> {
    let file = File::open(path)?;
    match format {
        OutputFormat::Json => Ok(serde_json::from_reader(std::io::BufReader::new(file))?),
        OutputFormat::Csv => {
            let mut r = csv::Reader::from_reader(file);
            let traces = r.headers()?.len() == CSV_HEADER.len() + 1;
            let required = |s: &str| parse_opt(s)?.ok_or_else(|| ExperimentError::InvalidSweep("missing value".into()));
            let mut rows = Vec::new();
            for rec in r.records() {
                let rec = rec?;
                let int = |i: usize| {
                    rec[i].parse::<u64>().map_err(|_| ExperimentError::InvalidSweep(format!("bad integer `{}`", &rec[i])))
                };
                let ee_trace = if traces {
                    let field = &rec[CSV_HEADER.len()];
                    let v = if field.is_empty() {
                        Vec::new()
                    } else {
                        field.split(';').map(required).collect::<Result<Vec<_>, _>>()?
                    };
                    Some(v)
                } else {
                    None
                };
                rows.push(SweepRow {
                    sweep_value: required(&rec[0])?,
                    seed: int(1)?,
                    iterations: int(2)? as usize,
                    ee_final: parse_opt(&rec[3])?,
                    crb_achieved: parse_opt(&rec[4])?,
                    min_robust_sinr: parse_opt(&rec[5])?,
                    max_rank_ratio: parse_opt(&rec[6])?,
                    status: parse_status(&rec[7])?,
                    wall_ms: required(&rec[8])?,
                    ee_trace,
                });
            }
            Ok(rows)
        }
    }
}

/// Seed average of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub sweep_value: f64,
    pub cells: usize,
    pub converged: usize,
    /// Mean final objective over converged cells.
    pub ee_mean: Option<f64>,
    pub iterations_mean: f64,
}

/// Per-grid-point averages, in grid order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut values: Vec<f64> = Vec::new();
    for r in rows {
        if !values.contains(&r.sweep_value) {
            values.push(r.sweep_value);
        }
    }
    values
        .into_iter()
        .map(|v| {
            let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.sweep_value == v).collect();
            let ok: Vec<f64> = cell.iter().filter(|r| r.converged()).filter_map(|r| r.ee_final).collect();
            SweepSummary {
                sweep_value: v,
                cells: cell.len(),
                converged: ok.len(),
                ee_mean: (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64),
                iterations_mean: cell.iter().map(|r| r.iterations as f64).sum::<f64>() / cell.len() as f64,
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(summary: &[SweepSummary], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sweep_value", "cells", "converged", "ee_mean", "iterations_mean"])?;
    for s in summary {
        w.write_record([
            num(s.sweep_value),
            s.cells.to_string(),
            s.converged.to_string(),
            opt(s.ee_mean),
            s.iterations_mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
