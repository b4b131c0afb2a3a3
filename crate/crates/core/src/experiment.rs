//! Benchmark trials: one field, one mask, one solve, one NMSE.
//!
//! Trials draw their randomness from seeds derived from the plan's base seed
//! and the coordinates that matter for each random component. The field of
//! trial `t` depends only on `(correlation, t)`, the noise on
//! `(correlation, noise, t)` and the mask on `(scheme, ratio, t)`, so cells
//! that differ only in scheme or algorithm are compared on identical data.

use core::fmt;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::field::{add_noise, generate_field, CorrelationLevel};
use crate::metrics::nmse;
use crate::sampling::{adjoint_mask, apply_mask, Scheme};
use crate::seed::derive_seed;
use crate::solver::{solve, HardRule, SolverConfig, DEFAULT_NONCONVEX_P};

/// Relative residual target of noiseless solves.
pub const NOISELESS_SIGMA_FRACTION: f64 = 1e-6;

const TAG_FIELD: u64 = 0x4649_454C_44;
const TAG_NOISE: u64 = 0x4E4F_4953_45;
const TAG_MASK: u64 = 0x4D41_534B;

/// Reconstruction algorithm of a benchmark cell.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Algorithm {
    pub p: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub hard_rule: HardRule,
}

impl Algorithm {
    pub const SHRINKAGE: Algorithm = Algorithm { p: 1.0, hard_rule: HardRule::Paper };
    pub const HARD: Algorithm = Algorithm { p: 0.0, hard_rule: HardRule::Paper };
    pub const NONCONVEX: Algorithm = Algorithm { p: DEFAULT_NONCONVEX_P, hard_rule: HardRule::Paper };

    pub fn name(&self) -> &'static str {
        if self.p == 1.0 {
            "shrinkage"
        } else if self.p == 0.0 {
            "hard_thresholding"
        } else {
            "nonconvex"
        }
    }

    /// `base` with this algorithm's exponent and hard rule.
    pub fn configure(&self, base: &SolverConfig) -> SolverConfig {
        SolverConfig { p: self.p, hard_rule: self.hard_rule, ..base.clone() }
    }

    fn key(&self) -> (u64, u8) {
        let rule = if self.p == 0.0 { self.hard_rule as u8 } else { 0 };
        (self.p.to_bits(), rule)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            "hard_thresholding" => write!(f, "hard_thresholding({})", self.hard_rule),
            "nonconvex" => write!(f, "nonconvex(p={})", self.p),
            other => f.write_str(other),
        }
    }
}

/// Coordinates of one cell of the factorial design.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cell {
    pub correlation: CorrelationLevel,
    pub scheme: Scheme,
    pub ratio: f64,
    pub noise: f64,
    pub algorithm: Algorithm,
}

/// Totally ordered identity of a [`Cell`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    correlation: u64,
    scheme: Scheme,
    ratio: u64,
    noise: u64,
    algorithm: (u64, u8),
}

fn correlation_code(level: CorrelationLevel) -> u64 {
    match level {
        CorrelationLevel::Low => 1,
        CorrelationLevel::Medium => 2,
        CorrelationLevel::High => 3,
        CorrelationLevel::Custom(l) => l.to_bits(),
    }
}

impl Cell {
    pub fn key(&self) -> CellKey {
        CellKey {
            correlation: correlation_code(self.correlation),
            scheme: self.scheme,
            ratio: self.ratio.to_bits(),
            noise: self.noise.to_bits(),
            algorithm: self.algorithm.key(),
        }
    }

    /// Seed reported for trial `trial` of this cell.
    pub fn trial_seed(&self, base_seed: u64, trial: u64) -> u64 {
        let k = self.key();
        derive_seed(
            base_seed,
            &[k.correlation, k.scheme as u64, k.ratio, k.noise, k.algorithm.0, k.algorithm.1 as u64, trial],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(invalid!("ratio must lie in (0, 1], got {}", self.ratio));
        }
        if !(self.noise >= 0.0) {
            return Err(invalid!("noise level must be non-negative, got {}", self.noise));
        }
        if !(0.0..=1.0).contains(&self.algorithm.p) {
            return Err(invalid!("p must lie in [0, 1], got {}", self.algorithm.p));
        }
        Ok(())
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/ratio={}/noise={}/{}",
            self.correlation, self.scheme, self.ratio, self.noise, self.algorithm
        )
    }
}

/// Plan-wide settings shared by every trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSettings {
    pub n: usize,
    pub base_seed: u64,
    /// One field per correlation level instead of one per trial.
    pub fixed_field: bool,
    /// Solver caps and schedule; `p`, `hard_rule` and `sigma` are set per cell.
    pub solver: SolverConfig,
}

impl Default for TrialSettings {
    fn default() -> Self {
        Self { n: 64, base_seed: 0, fixed_field: false, solver: SolverConfig::default() }
    }
}

/// Seeds of the random components of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub trial: u64,
    pub field: u64,
    pub noise: u64,
    pub mask: u64,
}

pub fn trial_seeds(cell: &Cell, trial: u64, settings: &TrialSettings) -> TrialSeeds {
    let k = cell.key();
    let base = settings.base_seed;
    let field = if settings.fixed_field {
        derive_seed(base, &[TAG_FIELD, k.correlation])
    } else {
        derive_seed(base, &[TAG_FIELD, k.correlation, trial])
    };
    TrialSeeds {
        trial: cell.trial_seed(base, trial),
        field,
        noise: derive_seed(base, &[TAG_NOISE, k.correlation, k.noise, trial]),
        mask: derive_seed(base, &[TAG_MASK, k.scheme as u64, k.ratio, trial]),
    }
}

/// Result of one trial, without wall time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub seed: u64,
    pub nmse: f64,
    pub converged: bool,
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Solver failure message; the NMSE is then that of the zero-filled data.
    pub failure: Option<String>,
}

/// Residual target: `1e-6‖y‖₂` without noise, else `√m · noise std`.
pub fn residual_target(noise_std: f64, observations: usize, y_norm: f64) -> f64 {
    if noise_std == 0.0 {
        NOISELESS_SIGMA_FRACTION * y_norm
    } else {
        libm::sqrt(observations as f64) * noise_std
    }
}

/// field → noise → mask → observe → solve → NMSE against the clean field.
pub fn run_trial(cell: &Cell, trial: u64, settings: &TrialSettings) -> Result<TrialOutcome> {
    cell.validate()?;
    let seeds = trial_seeds(cell, trial, settings);
    let truth = generate_field(settings.n, cell.correlation, seeds.field)?;
    let noisy = add_noise(&truth, cell.noise, seeds.noise)?;
    let mask = cell.scheme.generate(settings.n, settings.n, cell.ratio, seeds.mask)?;
    let obs = apply_mask(&mask, &noisy.values)?;
    let noise_std = cell.noise * truth.rms();
    let sigma = residual_target(noise_std, obs.len(), obs.norm());
    let cfg = cell.algorithm.configure(&settings.solver).with_sigma(sigma);
    match solve(&obs, &cfg) {
        Ok(res) => Ok(TrialOutcome {
            seed: seeds.trial,
            nmse: nmse(&res.estimate, &truth.values)?,
            converged: res.converged,
            outer_iters: res.state.outer_count,
            inner_iters: res.state.inner_count,
            failure: None,
        }),
        Err(e) => {
            let fallback = adjoint_mask(&mask, &obs)?;
            Ok(TrialOutcome {
                seed: seeds.trial,
                nmse: nmse(&fallback, &truth.values)?,
                converged: false,
                outer_iters: 0,
                inner_iters: 0,
                failure: Some(format!("{e}")),
            })
        }
    }
}

/// Mean and spread of one cell over its trials.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAggregate {
    pub cell: Cell,
    pub trials: usize,
    pub mean_nmse: f64,
    /// Sample standard deviation (zero for a single trial).
    pub std_nmse: f64,
    pub convergence_rate: f64,
}

/// Groups `(cell, nmse, converged)` rows by cell, in order of first appearance.
pub fn aggregate<'a>(rows: impl IntoIterator<Item = (&'a Cell, f64, bool)>) -> Vec<CellAggregate> {
    let mut order: Vec<Cell> = Vec::new();
    let mut groups: BTreeMap<CellKey, (Vec<f64>, usize)> = BTreeMap::new();
    for (cell, value, converged) in rows {
        let entry = groups.entry(cell.key()).or_insert_with(|| {
            order.push(*cell);
            (Vec::new(), 0)
        });
        entry.0.push(value);
        entry.1 += converged as usize;
    }
    order
        .into_iter()
        .map(|cell| {
            let (values, conv) = &groups[&cell.key()];
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = if values.len() > 1 {
                libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
            } else {
                0.0
            };
            CellAggregate {
                cell,
                trials: values.len(),
                mean_nmse: mean,
                std_nmse: std,
                convergence_rate: *conv as f64 / n,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CheckKind {
    /// Mean NMSE does not increase with the sampling ratio.
    RatioMonotone,
    /// Mean NMSE does not decrease with the noise level.
    NoiseMonotone,
    /// Non-convex is no worse than shrinkage.
    NonconvexVsShrinkage,
    /// Shrinkage is no worse than hard thresholding.
    ShrinkageVsHard,
    /// A blue-noise scheme is no worse than random at the lowest ratio.
    BlueNoiseVsRandom,
}

impl CheckKind {
    pub const ALL: [CheckKind; 5] = [
        CheckKind::RatioMonotone,
        CheckKind::NoiseMonotone,
        CheckKind::NonconvexVsShrinkage,
        CheckKind::ShrinkageVsHard,
        CheckKind::BlueNoiseVsRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::RatioMonotone => "ratio_monotone",
            CheckKind::NoiseMonotone => "noise_monotone",
            CheckKind::NonconvexVsShrinkage => "nonconvex_vs_shrinkage",
            CheckKind::ShrinkageVsHard => "shrinkage_vs_hard",
            CheckKind::BlueNoiseVsRandom => "blue_noise_vs_random",
        }
    }
}

/// One pairwise comparison: `better` is expected to have the lower (or equal)
/// mean NMSE. `margin = worse.mean − better.mean`.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub kind: CheckKind,
    pub better: CellAggregate,
    pub worse: CellAggregate,
    pub margin: f64,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.margin >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrendReport {
    pub comparisons: Vec<Comparison>,
}

impl TrendReport {
    pub fn of_kind(&self, kind: CheckKind) -> impl Iterator<Item = &Comparison> {
        self.comparisons.iter().filter(move |c| c.kind == kind)
    }

    /// `None` when the aggregates held no comparison of this kind.
    pub fn passed(&self, kind: CheckKind) -> Option<bool> {
        let mut any = false;
        for c in self.of_kind(kind) {
            any = true;
            if !c.passed() {
                return Some(false);
            }
        }
        any.then_some(true)
    }

    pub fn violations(&self, kind: CheckKind) -> impl Iterator<Item = &Comparison> {
        self.of_kind(kind).filter(|c| !c.passed())
    }

    pub fn min_margin(&self, kind: CheckKind) -> Option<f64> {
        self.of_kind(kind).map(|c| c.margin).reduce(f64::min)
    }
}

/// Ordering and trend checks over aggregated cells.
///
/// Fails when the aggregates support no comparison at all, naming the
/// partner cells that would be needed.
pub fn compare_report(aggregates: &[CellAggregate]) -> Result<TrendReport> {
    let by_key: BTreeMap<CellKey, &CellAggregate> = aggregates.iter().map(|a| (a.cell.key(), a)).collect();
    let lookup = |cell: Cell| by_key.get(&cell.key()).copied();
    let mut ratios: Vec<f64> = aggregates.iter().map(|a| a.cell.ratio).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ratios.dedup();
    let mut noises: Vec<f64> = aggregates.iter().map(|a| a.cell.noise).collect();
    noises.sort_by(|a, b| a.partial_cmp(b).unwrap());
    noises.dedup();
    let lowest_ratio = ratios.first().copied();

    let mut comparisons = Vec::new();
    let mut push = |kind, better: &CellAggregate, worse: &CellAggregate| {
        comparisons.push(Comparison {
            kind,
            better: better.clone(),
            worse: worse.clone(),
            margin: worse.mean_nmse - better.mean_nmse,
        });
    };

    for agg in aggregates {
        let cell = agg.cell;
        // Next larger ratio in the same row.
        if let Some(&next) = ratios.iter().find(|&&r| r > cell.ratio) {
            if let Some(other) = lookup(Cell { ratio: next, ..cell }) {
                push(CheckKind::RatioMonotone, other, agg);
            }
        }
        if let Some(&next) = noises.iter().find(|&&v| v > cell.noise) {
            if let Some(other) = lookup(Cell { noise: next, ..cell }) {
                push(CheckKind::NoiseMonotone, agg, other);
            }
        }
        if cell.algorithm.name() == "nonconvex" {
            if let Some(shrink) = lookup(Cell { algorithm: Algorithm::SHRINKAGE, ..cell }) {
                push(CheckKind::NonconvexVsShrinkage, agg, shrink);
            }
        }
        if cell.algorithm.name() == "hard_thresholding" {
            if let Some(shrink) = lookup(Cell { algorithm: Algorithm::SHRINKAGE, ..cell }) {
                push(CheckKind::ShrinkageVsHard, shrink, agg);
            }
        }
        if cell.scheme.is_blue_noise() && Some(cell.ratio) == lowest_ratio {
            if let Some(random) = lookup(Cell { scheme: Scheme::Random, ..cell }) {
                push(CheckKind::BlueNoiseVsRandom, agg, random);
            }
        }
    }

    if comparisons.is_empty() {
        let mut missing = String::new();
        for agg in aggregates.iter().take(4) {
            let cell = agg.cell;
            missing.push_str(&format!(
                "\n  {cell}: needs another ratio, noise level or algorithm in the same row, or {}",
                Cell { scheme: Scheme::Random, ..cell }
            ));
        }
        return Err(invalid!("aggregates contain no comparable cells:{missing}"));
    }
    Ok(TrendReport { comparisons })
}
