//! Command-line front end.
//!
//! Every subcommand prints a JSON header on stdout holding its fully resolved
//! configuration (derived seeds, correlation lengths, solver settings) and
//! its results; rerunning with the values in the header reproduces the run.
//! Exit status: 0 success, 1 invalid arguments or I/O, 2 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::LazyLock;

use bluefill_core::diagnostics::{diagnose, energy_fraction, DEFAULT_RANK_TOL};
use bluefill_core::field::{add_noise, generate_field_rect, preset_summary, GridField};
use bluefill_core::seed::substream;
use bluefill_core::solver::{auto_lambda, LambdaInit};
use bluefill_core::experiment::residual_target;
use bluefill_core::{apply_mask, nmse, solve, CorrelationLevel, HardRule, Scheme, SolverConfig};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bench::{length_scales, run_plan, BenchOptions};
use crate::error::{Error, Result};
use crate::io::{read_mask, read_matrix, write_mask, write_matrix, write_trace, MaskHeader};
use crate::plan::{parse_algorithm, ExperimentPlan};

/// Salt of the noise stream derived from `--seed`.
const NOISE_SALT: u64 = 0x6E6F_6973_65;

static VERSION: LazyLock<String> =
    LazyLock::new(|| format!("{}\ncorrelation lengths: {}", env!("CARGO_PKG_VERSION"), preset_summary()));

#[derive(Debug, Parser)]
#[command(name = "bluefill", about = "Sensor-grid reconstruction from sparse samples by low-rank matrix completion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a correlated Gaussian test field.
    GenField(GenFieldArgs),
    /// Generate a sampling mask.
    GenMask(GenMaskArgs),
    /// Reconstruct a field from the entries selected by a mask.
    Solve(SolveArgs),
    /// Run a benchmark plan.
    Bench(BenchArgs),
    /// Singular values, energy fractions and coherence of a field.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct GenFieldArgs {
    /// Grid size (square grid).
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Rows of a rectangular grid (overrides --n).
    #[arg(long)]
    pub rows: Option<usize>,
    /// Columns of a rectangular grid (overrides --n).
    #[arg(long)]
    pub cols: Option<usize>,
    /// low, medium, high, or a correlation length in grid cells.
    #[arg(long, default_value = "high")]
    pub level: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noise standard deviation as a fraction of the field's RMS.
    #[arg(long, default_value_t = 0.0, requires = "noisy_out")]
    pub noise: f64,
    /// Where to write the noisy field.
    #[arg(long)]
    pub noisy_out: Option<PathBuf>,
    /// Where to write the clean field (`.bin` for binary, else CSV).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenMaskArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// random, quasi_random, quasi_crystal or farthest_point.
    #[arg(long)]
    pub scheme: String,
    /// Fraction of cells to sample, in (0, 1].
    #[arg(long)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mask CSV; the JSON sidecar goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Field holding the measurements; only masked entries are read.
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// Penalty exponent: 1 nuclear norm, 0 rank, in between Schatten-p.
    #[arg(long, conflicts_with = "algorithm")]
    pub p: Option<f64>,
    /// shrinkage, hard, hard_derived or nonconvex.
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Threshold of the p = 0 update: paper or derived.
    #[arg(long)]
    pub hard_rule: Option<String>,
    /// Residual target: `auto`, or a number.
    #[arg(long, default_value = "auto")]
    pub sigma: String,
    /// Noise level used by `--sigma auto`, as a fraction of the RMS of the
    /// observed values (0: noiseless target 1e-6·‖y‖).
    #[arg(long, default_value_t = 0.0)]
    pub noise_level: f64,
    /// Initial λ (default 0.99·σ₁ of the zero-filled data).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub dec_fac: Option<f64>,
    #[arg(long)]
    pub inner_tol: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub max_inner: Option<usize>,
    /// Estimate (`.bin` for binary, else CSV).
    #[arg(long)]
    pub out: PathBuf,
    /// Write the per-iteration objective trace here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Ground truth for reporting NMSE.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// JSON plan; defaults apply to missing keys and to a missing file.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Override the plan's trial count.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Override the plan's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (0: all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Also write per-figure series for plotting.
    #[arg(long)]
    pub plot_data: bool,
    /// Suppress per-cell progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Field file; without it a field is generated from --n/--level/--seed.
    #[arg(long, conflicts_with = "level")]
    pub field: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long)]
    pub level: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative tolerance of the numeric rank.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
    /// Report energy fractions for k = 1..=top_k.
    #[arg(long, default_value_t = 6)]
    pub top_k: usize,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cmd = Cli::command().version(VERSION.as_str());
    let parsed = cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(cli.command) {
        Ok(header) => {
            let text = serde_json::to_string_pretty(&header).expect("header serializes");
            // A closed stdout (e.g. piped into `head`) is not an error of the run.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one command and returns its reproducibility header.
pub fn run(command: Command) -> Result<Value> {
    match command {
        Command::GenField(a) => gen_field(a),
        Command::GenMask(a) => gen_mask(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Bench(a) => bench(a),
        Command::Diagnose(a) => diagnose_cmd(a),
    }
}

fn parse<T: std::str::FromStr<Err = bluefill_core::Error>>(s: &str) -> Result<T> {
    Ok(s.parse::<T>()?)
}

fn shape(n: usize, rows: Option<usize>, cols: Option<usize>) -> (usize, usize) {
    (rows.unwrap_or(n), cols.unwrap_or(n))
}

fn gen_field(a: GenFieldArgs) -> Result<Value> {
    let level: CorrelationLevel = parse(&a.level)?;
    let (rows, cols) = shape(a.n, a.rows, a.cols);
    let field = generate_field_rect(rows, cols, level, a.seed)?;
    write_matrix(&a.out, &field.values)?;
    let noise_seed = substream(a.seed, NOISE_SALT);
    if let Some(path) = &a.noisy_out {
        let noisy = add_noise(&field, a.noise, noise_seed)?;
        write_matrix(path, &noisy.values)?;
    }
    Ok(json!({
        "command": "gen-field",
        "version": env!("CARGO_PKG_VERSION"),
        "rows": rows,
        "cols": cols,
        "level": level.to_string(),
        "length_scale": level.length_scale(),
        "seed": a.seed,
        "noise": a.noise,
        "noise_seed": noise_seed,
        "rms": field.rms(),
        "out": a.out,
        "noisy_out": a.noisy_out,
        "length_scales": length_scales(),
    }))
}

fn gen_mask(a: GenMaskArgs) -> Result<Value> {
    let scheme: Scheme = parse(&a.scheme)?;
    let (rows, cols) = shape(a.n, a.rows, a.cols);
    let mask = scheme.generate(rows, cols, a.ratio, a.seed)?;
    write_mask(&a.out, &mask)?;
    Ok(json!({
        "command": "gen-mask",
        "version": env!("CARGO_PKG_VERSION"),
        "mask": MaskHeader::of(&mask),
        "cells": mask.len(),
        "out": a.out,
    }))
}

#[derive(Serialize)]
struct SolveReport {
    converged: bool,
    outer_iters: usize,
    inner_iters: usize,
    residual: f64,
    final_lambda: f64,
    observations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    nmse: Option<f64>,
}

fn solve_cmd(a: SolveArgs) -> Result<Value> {
    let values = read_matrix(&a.field)?;
    let mask = read_mask(&a.mask, Some(values.shape()))?;
    let obs = apply_mask(&mask, &values)?;

    let mut cfg = match (&a.algorithm, a.p) {
        (Some(name), _) => parse_algorithm(name)?.configure(&SolverConfig::default()),
        (None, Some(p)) => SolverConfig { p, ..SolverConfig::default() },
        (None, None) => SolverConfig::default(),
    };
    if let Some(rule) = &a.hard_rule {
        cfg.hard_rule = parse::<HardRule>(rule)?;
    }
    if let Some(v) = a.dec_fac {
        cfg.dec_fac = v;
    }
    if let Some(v) = a.inner_tol {
        cfg.inner_tol = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.max_outer {
        cfg.max_outer = v;
    }
    if let Some(v) = a.max_inner {
        cfg.max_inner = v;
    }
    if !(a.noise_level >= 0.0) {
        return Err(Error::invalid(format!("--noise-level must be non-negative, got {}", a.noise_level)));
    }
    cfg.sigma = if a.sigma.trim().eq_ignore_ascii_case("auto") {
        let rms = obs.norm() / (obs.len() as f64).sqrt();
        residual_target(a.noise_level * rms, obs.len(), obs.norm())
    } else {
        a.sigma
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("--sigma must be `auto` or a number, got {:?}", a.sigma)))?
    };
    // Resolve the initial λ so the header records the value actually used.
    let lambda0 = match a.lambda {
        Some(l) => l,
        None => auto_lambda(&obs)?,
    };
    cfg.lambda_init = LambdaInit::Value(lambda0);
    cfg.record_trace = a.trace.is_some();
    cfg.validate()?;

    let truth = a.truth.as_deref().map(read_matrix).transpose()?;
    let result = solve(&obs, &cfg)?;
    write_matrix(&a.out, &result.estimate)?;
    if let Some(path) = &a.trace {
        write_trace(path, &result.trace)?;
    }
    let report = SolveReport {
        converged: result.converged,
        outer_iters: result.state.outer_count,
        inner_iters: result.state.inner_count,
        residual: result.residual(),
        final_lambda: result.state.lambda,
        observations: obs.len(),
        nmse: truth.as_ref().map(|t| nmse(&result.estimate, t)).transpose()?,
    };
    let config = SolverConfig { record_trace: false, ..cfg };
    Ok(json!({
        "command": "solve",
        "version": env!("CARGO_PKG_VERSION"),
        "field": a.field,
        "mask": MaskHeader::of(&mask),
        "solver": config,
        "noise_level": a.noise_level,
        "out": a.out,
        "trace": a.trace,
        "result": report,
    }))
}

fn bench(a: BenchArgs) -> Result<Value> {
    let mut plan = match &a.plan {
        Some(path) => ExperimentPlan::load(path)?,
        None => ExperimentPlan::default(),
    };
    if let Some(t) = a.trials {
        plan.trials = t;
    }
    if let Some(s) = a.seed {
        plan.base_seed = s;
    }
    let opts = BenchOptions { jobs: a.jobs, out_dir: a.out.clone(), plot_data: a.plot_data, progress: !a.quiet };
    let summary = run_plan(&plan, &opts)?;
    let checks: serde_json::Map<String, Value> = bluefill_core::experiment::CheckKind::ALL
        .iter()
        .filter_map(|&kind| {
            let report = summary.report.as_ref()?;
            let passed = report.passed(kind)?;
            Some((
                kind.name().to_string(),
                json!({ "passed": passed, "min_margin": report.min_margin(kind) }),
            ))
        })
        .collect();
    let failed = summary.records.iter().filter(|r| r.failure.is_some()).count();
    Ok(json!({
        "command": "bench",
        "version": env!("CARGO_PKG_VERSION"),
        "plan": plan.resolved()?,
        "jobs": summary.jobs,
        "out": a.out,
        "cells": summary.aggregates.len(),
        "records": summary.records.len(),
        "solver_failures": failed,
        "length_scales": length_scales(),
        "checks": checks,
        "wall_time_s": summary.wall_time_s,
    }))
}

fn diagnose_cmd(a: DiagnoseArgs) -> Result<Value> {
    let (source, field) = match &a.field {
        Some(path) => (json!({ "field": path }), read_matrix(path)?),
        None => {
            let level: CorrelationLevel = parse(a.level.as_deref().unwrap_or("high"))?;
            let GridField { values, .. } = generate_field_rect(a.n, a.n, level, a.seed)?;
            let source = json!({
                "n": a.n,
                "level": level.to_string(),
                "length_scale": level.length_scale(),
                "seed": a.seed,
            });
            (source, values)
        }
    };
    if a.top_k == 0 {
        return Err(Error::invalid("--top-k must be at least 1"));
    }
    let diag = diagnose(&field, a.rank_tol)?;
    let k_max = a.top_k.min(diag.singular_values.len());
    let energy = (1..=k_max)
        .map(|k| Ok(json!({ "k": k, "fraction": energy_fraction(&diag, k)? })))
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "command": "diagnose",
        "version": env!("CARGO_PKG_VERSION"),
        "source": source,
        "rows": field.rows(),
        "cols": field.cols(),
        "rank_tol": a.rank_tol,
        "numeric_rank": diag.numeric_rank,
        "max_abs_left": diag.max_abs_left,
        "max_abs_right": diag.max_abs_right,
        "coherence_mu": diag.coherence_mu,
        "energy_fractions": energy,
        "singular_values": diag.singular_values,
    }))
}

