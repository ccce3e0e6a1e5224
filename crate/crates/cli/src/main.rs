// SPDX-License-Identifier: Apache-2.0

//! `isac`: seeded experiment sweeps and single-run verification.
//!
//! Exit status is 0 when every cell converged (and, for `verify`, every
//! check passed), 2 when any cell failed, and 1 on a usage or I/O error.

mod lists;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isac_core::channel::generate_channels;
use isac_core::conic::ClarabelSolver;
use isac_core::experiment::{self, summarize, write_rows, write_summary, OutputFormat, SweepKind, SweepSpec};
use isac_core::optimizer::run;
use isac_core::verification::full_report;
use isac_core::{Rng, SystemConfig};

use lists::{parse_list, parse_seeds};

#[derive(Parser, Debug)]
#[command(name = "isac", version, about = "Robust energy-efficient ISAC beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convergence traces over a grid of transmit antenna counts.
    Converge(Opts),
    /// Energy efficiency against the root-CRB requirement.
    SweepCrb(Opts),
    /// Energy efficiency against the channel error radius.
    SweepPhi(Opts),
    /// Run one configuration and audit the result.
    Verify(Opts),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Opts {
    /// Base scenario as JSON; the built-in reference scenario otherwise.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seeds, e.g. `0,1,2` or `0..10`.
    #[arg(long, value_name = "LIST")]
    seeds: Option<String>,
    /// Output file; standard output otherwise.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Row format; `csv` by default, `verify` writes JSON.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Transmit antenna counts.
    #[arg(long, value_name = "LIST")]
    mt: Option<String>,
    /// Channel error radii.
    #[arg(long, value_name = "LIST")]
    phi: Option<String>,
    /// Root-CRB requirements in radians.
    #[arg(long = "root-crb", value_name = "LIST")]
    root_crb: Option<String>,
    #[arg(long = "max-iters", value_name = "N")]
    max_iters: Option<usize>,
    /// Convergence precision; `inf` stops after one iteration.
    #[arg(long, value_name = "X")]
    pcon: Option<f64>,
    /// Error draws per user in the robustness audit.
    #[arg(long, value_name = "N")]
    samples: Option<usize>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn list<T: std::str::FromStr>(arg: &Option<String>, flag: &str) -> Result<Option<Vec<T>>, Failure> {
    arg.as_deref()
        .map(|s| parse_list(s).map_err(|e| usage(format!("--{flag}: {e}"))))
        .transpose()
}

fn single<T: std::str::FromStr + Copy>(arg: &Option<String>, flag: &str, cmd: &str) -> Result<Option<T>, Failure> {
    match list::<T>(arg, flag)? {
        Some(v) if v.len() == 1 => Ok(Some(v[0])),
        Some(_) => Err(usage(format!("--{flag} takes a single value for `{cmd}`"))),
        None => Ok(None),
    }
}

fn base_config(opts: &Opts) -> Result<SystemConfig, Failure> {
    let mut cfg = match &opts.config {
        Some(path) => SystemConfig::from_path(path).map_err(|e| usage(format!("{}: {e}", path.display())))?,
        None => SystemConfig::default(),
    };
    if let Some(n) = opts.max_iters {
        cfg.max_iters = n;
    }
    if let Some(p) = opts.pcon {
        if !(p > 0.0) {
            return Err(usage("--pcon must be positive"));
        }
        cfg.p_con = p;
    }
    Ok(cfg)
}

fn seeds(opts: &Opts, default: &str) -> Result<Vec<u64>, Failure> {
    parse_seeds(opts.seeds.as_deref().unwrap_or(default)).map_err(|e| usage(format!("--seeds: {e}")))
}

/// `dir/name.csv` becomes `dir/name_mt8.csv`.
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

/// Run one sweep and write rows plus seed averages. Returns whether every
/// cell converged.
fn run_and_write(spec: &SweepSpec, out: Option<&Path>, format: OutputFormat) -> Result<bool, Failure> {
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let rows = experiment::run_sweep(spec)?;
    let summary = summarize(&rows);
    match out {
        Some(path) => {
            experiment::emit(&rows, path, format)?;
            let file = fs::File::create(with_suffix(path, "_summary").with_extension("csv"))?;
            write_summary(&summary, io::BufWriter::new(file))?;
        }
        None => {
            write_rows(&rows, io::stdout().lock(), format)?;
            write_summary(&summary, io::stderr().lock())?;
        }
    }
    let failed = rows.iter().filter(|r| !r.converged()).count();
    eprintln!("{}: {} cells, {} did not converge", spec.kind, rows.len(), failed);
    Ok(failed == 0)
}

fn sweep(kind: SweepKind, opts: &Opts, cmd: &str) -> Result<bool, Failure> {
    let mut base = base_config(opts)?;
    let seeds = seeds(opts, "0..10")?;
    let format = opts.format.unwrap_or(Format::Csv).into();

    if kind == SweepKind::Convergence {
        if let Some(phi) = single(&opts.phi, "phi", cmd)? {
            base = base.with_phi(phi);
        }
        if let Some(r) = single(&opts.root_crb, "root-crb", cmd)? {
            base = base.with_root_crb(r);
        }
        let grid = match list::<usize>(&opts.mt, "mt")? {
            Some(v) => v.into_iter().map(|m| m as f64).collect(),
            None => kind.default_grid(),
        };
        let mut spec = SweepSpec::new(kind, grid, seeds, base);
        if let Some(n) = opts.samples {
            spec.robust_samples = n;
        }
        return run_and_write(&spec, opts.out.as_deref(), format);
    }

    let grid = if kind == SweepKind::CrbSweep {
        // A scenario file keeps its own radius; the built-in one uses the
        // radius of the reference CRB sweep.
        match single(&opts.phi, "phi", cmd)? {
            Some(phi) => base = base.with_phi(phi),
            None if opts.config.is_none() => base = base.with_phi(kind.default_phi()),
            None => {}
        }
        list::<f64>(&opts.root_crb, "root-crb")?
    } else {
        if let Some(r) = single(&opts.root_crb, "root-crb", cmd)? {
            base = base.with_root_crb(r);
        }
        list::<f64>(&opts.phi, "phi")?
    };
    let grid = grid.unwrap_or_else(|| kind.default_grid());
    let bases: Vec<SystemConfig> = match list::<usize>(&opts.mt, "mt")? {
        Some(mts) => mts.into_iter().map(|m| base.clone().with_tx_antennas(m)).collect(),
        None => vec![base],
    };
    let mut ok = true;
    for b in &bases {
        let out = match &opts.out {
            Some(p) if bases.len() > 1 => Some(with_suffix(p, &format!("_mt{}", b.tx_antennas))),
            other => other.clone(),
        };
        let mut spec = SweepSpec::new(kind, grid.clone(), seeds.clone(), b.clone());
        if let Some(n) = opts.samples {
            spec.robust_samples = n;
        }
        ok &= run_and_write(&spec, out.as_deref(), format)?;
    }
    Ok(ok)
}

fn verify(opts: &Opts) -> Result<bool, Failure> {
    let mut cfg = base_config(opts)?;
    if let Some(m) = single(&opts.mt, "mt", "verify")? {
        cfg = cfg.with_tx_antennas(m);
    }
    if let Some(phi) = single(&opts.phi, "phi", "verify")? {
        cfg = cfg.with_phi(phi);
    }
    if let Some(r) = single(&opts.root_crb, "root-crb", "verify")? {
        cfg = cfg.with_root_crb(r);
    }
    let seeds = seeds(opts, "0")?;
    let [seed] = seeds[..] else {
        return Err(usage("`verify` takes a single seed"));
    };
    if matches!(opts.format, Some(Format::Csv)) {
        return Err(usage("`verify` writes JSON only"));
    }
    cfg.seed = seed;
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let channels = generate_channels(&cfg, &mut Rng::new(seed));
    let res = run(&cfg, &channels, &ClarabelSolver::default());
    let report = match full_report(&res, &channels, &cfg, opts.samples.unwrap_or(10_000), &mut Rng::new(seed).stream(1)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("seed {seed}: {e}{}", res.failure.map(|f| format!(" ({f})")).unwrap_or_default());
            return Ok(false);
        }
    };
    let text = report.to_json_string() + "\n";
    match &opts.out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    if !report.all_ok() {
        eprintln!("seed {seed}: verification failed");
    }
    Ok(report.all_ok())
}

fn execute(cli: Cli) -> Result<bool, Failure> {
    match &cli.command {
        Command::Converge(o) => sweep(SweepKind::Convergence, o, "converge"),
        Command::SweepCrb(o) => sweep(SweepKind::CrbSweep, o, "sweep-crb"),
        Command::SweepPhi(o) => sweep(SweepKind::PhiSweep, o, "sweep-phi"),
        Command::Verify(o) => verify(o),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
