//! Majorization-Minimization matrix completion.
//!
//! Every inner iteration is a Landweber data step followed by a rewrite of
//! the singular values of the result:
//!
//! * `p = 1`: soft thresholding at `λ/2α` (nuclear norm),
//! * `p = 0`: hard thresholding (rank),
//! * `0 < p < 1`: reweighted shrinkage with weights from the previous
//!   iterate (Schatten-p quasi-norm).
//!
//! The inner loop runs at fixed λ until the relative objective decrease
//! drops below `inner_tol`; the outer (cooling) loop multiplies λ by
//! `dec_fac` until `‖y − Mx‖₂ ≤ σ`.
//!
//! The tracked objective is the one each update rule exactly majorizes, so
//! inner-loop traces are monotone:
//!
//! | rule | penalty |
//! |------|---------|
//! | soft | `λ Σσᵢ` |
//! | hard, derived threshold `√(λ/α)` | `λ · rank` |
//! | hard, paper threshold `λ/2α` | `(λ²/4α) · rank` |
//! | reweighted, `0<p<1` | `(λ/p) Σσᵢᵖ` |

mod threshold;

use core::fmt;
use core::str::FromStr;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::Svd;
use crate::matrix::Matrix;
use crate::sampling::{adjoint_mask, Observations};

pub use threshold::{hard_threshold, nonconvex_shrink, soft_threshold, WEIGHT_FLOOR};

/// Warm-started SVDs between cold restarts; bounds orthogonality drift.
const COLD_SVD_EVERY: usize = 64;

/// Threshold used by the hard-thresholding update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum HardRule {
    /// `λ/2α`, shared with the soft threshold.
    #[default]
    Paper,
    /// `√(λ/α)`, the exact minimizer of the decoupled rank cost.
    Derived,
}

impl HardRule {
    pub fn name(self) -> &'static str {
        match self {
            HardRule::Paper => "paper",
            HardRule::Derived => "derived",
        }
    }
}

impl fmt::Display for HardRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HardRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" => Ok(HardRule::Paper),
            "derived" => Ok(HardRule::Derived),
            _ => Err(invalid!("unknown hard-threshold rule {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LambdaInit {
    /// `0.99 · σ₁(Mᵀy)`.
    #[default]
    Auto,
    Value(f64),
}

/// Tuning of the cooling solver.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SolverConfig {
    /// 1 = nuclear norm, 0 = rank, in between = Schatten-p.
    pub p: f64,
    /// Majorizer constant; at least the top eigenvalue of `MᵀM` (1 for masks).
    pub alpha: f64,
    /// Target residual `‖y − Mx‖₂`.
    pub sigma: f64,
    pub dec_fac: f64,
    pub inner_tol: f64,
    pub lambda_init: LambdaInit,
    pub max_outer: usize,
    pub max_inner: usize,
    pub hard_rule: HardRule,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            alpha: 1.0,
            sigma: 0.0,
            dec_fac: 0.9,
            inner_tol: 1e-6,
            lambda_init: LambdaInit::Auto,
            max_outer: 200,
            max_inner: 200,
            hard_rule: HardRule::Paper,
            record_trace: false,
        }
    }
}

/// Default exponent of the non-convex solver.
pub const DEFAULT_NONCONVEX_P: f64 = 0.8;

impl SolverConfig {
    pub fn shrinkage() -> Self {
        Self::default()
    }

    pub fn hard_thresholding(rule: HardRule) -> Self {
        Self { p: 0.0, hard_rule: rule, ..Self::default() }
    }

    pub fn nonconvex(p: f64) -> Self {
        Self { p, ..Self::default() }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid!("p must lie in [0, 1], got {}", self.p));
        }
        if !(self.alpha >= 1.0) || !self.alpha.is_finite() {
            return Err(invalid!("alpha must be >= 1 for mask operators, got {}", self.alpha));
        }
        if !(self.sigma >= 0.0) {
            return Err(invalid!("sigma must be non-negative, got {}", self.sigma));
        }
        if !(self.dec_fac > 0.0 && self.dec_fac < 1.0) {
            return Err(invalid!("dec_fac must lie in (0, 1), got {}", self.dec_fac));
        }
        if !(self.inner_tol > 0.0) {
            return Err(invalid!("inner_tol must be positive, got {}", self.inner_tol));
        }
        if let LambdaInit::Value(l) = self.lambda_init {
            if !(l > 0.0) || !l.is_finite() {
                return Err(invalid!("initial lambda must be positive, got {l}"));
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(invalid!("iteration caps must be at least 1"));
        }
        Ok(())
    }

    fn rule(&self) -> Rule {
        if self.p == 1.0 {
            Rule::Soft
        } else if self.p == 0.0 {
            Rule::Hard(self.hard_rule)
        } else {
            Rule::Reweighted(self.p)
        }
    }

    /// Objective weight multiplying the penalty sum (see module docs).
    pub fn penalty_weight(&self, lambda: f64) -> f64 {
        match self.rule() {
            Rule::Soft | Rule::Hard(HardRule::Derived) => lambda,
            Rule::Hard(HardRule::Paper) => lambda * lambda / (4.0 * self.alpha),
            Rule::Reweighted(p) => lambda / p,
        }
    }

    /// Unweighted penalty of a spectrum: `Σσᵢ`, `rank` or `Σσᵢᵖ`.
    pub fn penalty(&self, s: &[f64]) -> f64 {
        match self.rule() {
            Rule::Soft => s.iter().sum(),
            Rule::Hard(_) => s.iter().filter(|&&x| x > 0.0).count() as f64,
            Rule::Reweighted(p) => s.iter().map(|&x| if x > 0.0 { libm::pow(x, p) } else { 0.0 }).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Rule {
    Soft,
    Hard(HardRule),
    Reweighted(f64),
}

/// Iterate of a solve together with its bookkeeping.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub iterate: Matrix,
    pub lambda: f64,
    pub objective: f64,
    pub residual: f64,
    pub inner_count: usize,
    pub outer_count: usize,
    /// Spectrum of `iterate`.
    pub singular_values: Vec<f64>,
    /// Diagonal of the last reweighting matrix (non-convex rule only).
    pub weights: Vec<f64>,
    svd: Option<Svd>,
    warm_uses: usize,
}

/// One row of the optional iteration log. `inner = 0` is the state entering
/// an inner loop.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRow {
    pub outer: usize,
    pub inner: usize,
    pub lambda: f64,
    pub objective: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub estimate: Matrix,
    /// `‖y − M(estimate)‖₂ ≤ σ` was reached before the iteration caps.
    pub converged: bool,
    pub state: SolverState,
    pub trace: Vec<TraceRow>,
}

impl SolveResult {
    pub fn residual(&self) -> f64 {
        self.state.residual
    }
}

/// `x + (1/α) Mᵀ(y − Mx)`.
pub fn landweber_step(x: &Matrix, obs: &Observations, alpha: f64) -> Result<Matrix> {
    let mask = obs.mask();
    if x.shape() != (mask.rows(), mask.cols()) {
        return Err(invalid!(
            "iterate is {}x{} but mask is {}x{}",
            x.rows(),
            x.cols(),
            mask.rows(),
            mask.cols()
        ));
    }
    if !(alpha > 0.0) {
        return Err(invalid!("alpha must be positive, got {alpha}"));
    }
    let mut out = x.clone();
    let step = 1.0 / alpha;
    for (&ij, &y) in mask.indices().iter().zip(obs.values()) {
        if alpha == 1.0 {
            out[ij] = y;
        } else {
            out[ij] += step * (y - x[ij]);
        }
    }
    Ok(out)
}

/// `‖y − Mx‖₂`.
pub fn residual_norm(x: &Matrix, obs: &Observations) -> f64 {
    let sq: f64 = obs
        .mask()
        .indices()
        .iter()
        .zip(obs.values())
        .map(|(&ij, &y)| (y - x[ij]) * (y - x[ij]))
        .sum();
    libm::sqrt(sq)
}

/// `J = ‖y − Mx‖² + weight(λ) · penalty(s)` for an iterate with spectrum `s`.
pub fn objective(cfg: &SolverConfig, lambda: f64, residual: f64, s: &[f64]) -> f64 {
    residual * residual + cfg.penalty_weight(lambda) * cfg.penalty(s)
}

struct Shrunk {
    x: Matrix,
    s: Vec<f64>,
    weights: Vec<f64>,
    svd: Svd,
}

fn shrink(
    z: &Matrix,
    state: &SolverState,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<Shrunk> {
    let svd = match &state.svd {
        Some(prev) if state.warm_uses < COLD_SVD_EVERY => Svd::compute_warm(z, prev)?,
        _ => Svd::compute(z)?,
    };
    let alpha = cfg.alpha;
    let (s, weights) = match cfg.rule() {
        Rule::Soft => (soft_threshold(&svd.s, lambda / (2.0 * alpha))?, Vec::new()),
        Rule::Hard(rule) => {
            let t = match rule {
                HardRule::Paper => lambda / (2.0 * alpha),
                HardRule::Derived => libm::sqrt(lambda / alpha),
            };
            (hard_threshold(&svd.s, t)?, Vec::new())
        }
        Rule::Reweighted(p) => {
            let prev = &state.singular_values;
            let prev = if prev.len() == svd.s.len() { prev.clone() } else { vec![0.0; svd.s.len()] };
            let top = prev.first().copied().unwrap_or(0.0);
            let weights = prev
                .iter()
                .map(|&x| if x > WEIGHT_FLOOR * top { libm::pow(x, p - 2.0) } else { f64::INFINITY })
                .collect();
            (nonconvex_shrink(&svd.s, &prev, lambda, alpha, p)?, weights)
        }
    };
    let x = svd.reconstruct_with(&s);
    Ok(Shrunk { x, s, weights, svd })
}

/// Singular-value rewrite of a post-Landweber iterate at `state.lambda`.
pub fn sv_update(x_next: &Matrix, state: &SolverState, cfg: &SolverConfig) -> Result<Matrix> {
    Ok(shrink(x_next, state, state.lambda, cfg)?.x)
}

impl SolverState {
    /// State at `x0`.
    ///
    /// The reweighted rule has no usable weights at the zero matrix, so a
    /// zero start first takes one bootstrap step: the Landweber step from
    /// zero (the zero-filled observations) shrunk with weights from its own
    /// spectrum. That step is not a majorization step and is part of the
    /// initialization; the returned state is its result, counted as one
    /// inner iteration.
    pub fn new(x0: Matrix, obs: &Observations, lambda: f64, cfg: &SolverConfig) -> Result<Self> {
        let svd = Svd::compute(&x0)?;
        let residual = residual_norm(&x0, obs);
        let objective = objective(cfg, lambda, residual, &svd.s);
        let bootstrap = matches!(cfg.rule(), Rule::Reweighted(_)) && svd.s.iter().all(|&s| s == 0.0);
        let mut state = Self {
            iterate: x0,
            lambda,
            objective,
            residual,
            inner_count: 0,
            outer_count: 0,
            singular_values: svd.s.clone(),
            weights: Vec::new(),
            svd: Some(svd),
            warm_uses: 0,
        };
        if bootstrap {
            let z = landweber_step(&state.iterate, obs, cfg.alpha)?;
            let zs = Svd::compute(&z)?;
            state.singular_values = zs.s.clone();
            state.svd = Some(zs);
            state.apply(shrink(&z, &state, lambda, cfg)?, obs, lambda, cfg);
        }
        Ok(state)
    }

    fn apply(&mut self, next: Shrunk, obs: &Observations, lambda: f64, cfg: &SolverConfig) {
        let residual = residual_norm(&next.x, obs);
        self.objective = objective(cfg, lambda, residual, &next.s);
        self.warm_uses = if self.warm_uses >= COLD_SVD_EVERY { 0 } else { self.warm_uses + 1 };
        self.iterate = next.x;
        self.singular_values = next.s;
        self.weights = next.weights;
        self.svd = Some(next.svd);
        self.residual = residual;
        self.inner_count += 1;
    }
}

fn check_inputs(obs: &Observations, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if obs.values().iter().any(|v| !v.is_finite()) {
        return Err(invalid!("observations must be finite"));
    }
    Ok(())
}

/// Runs the inner loop at `lambda` from the current state.
fn inner_loop(
    state: &mut SolverState,
    obs: &Observations,
    lambda: f64,
    cfg: &SolverConfig,
    trace: &mut Vec<TraceRow>,
) -> Result<()> {
    state.lambda = lambda;
    // Re-evaluate at the new λ; the penalty weight changed.
    let penalty_spectrum = if state.iterate.frobenius_norm_sq() == 0.0 {
        Vec::new()
    } else {
        state.singular_values.clone()
    };
    state.objective = objective(cfg, lambda, state.residual, &penalty_spectrum);
    if cfg.record_trace {
        trace.push(TraceRow {
            outer: state.outer_count,
            inner: 0,
            lambda,
            objective: state.objective,
            residual: state.residual,
        });
    }
    for inner in 1..=cfg.max_inner {
        let z = landweber_step(&state.iterate, obs, cfg.alpha)?;
        let next = shrink(&z, state, lambda, cfg)?;
        let j_prev = state.objective;
        state.apply(next, obs, lambda, cfg);
        let j_next = state.objective;
        let residual = state.residual;
        if cfg.record_trace {
            trace.push(TraceRow { outer: state.outer_count, inner, lambda, objective: j_next, residual });
        }
        let denom = j_prev + j_next;
        if denom <= 0.0 || (j_prev - j_next) / denom < cfg.inner_tol {
            break;
        }
    }
    Ok(())
}

/// Minimizes `J` at fixed λ starting from `x0`.
pub fn solve_fixed_lambda(
    obs: &Observations,
    x0: Matrix,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<(SolverState, Vec<TraceRow>)> {
    check_inputs(obs, cfg)?;
    if !(lambda > 0.0) {
        return Err(invalid!("lambda must be positive, got {lambda}"));
    }
    let mut state = SolverState::new(x0, obs, lambda, cfg)?;
    let mut trace = Vec::new();
    inner_loop(&mut state, obs, lambda, cfg, &mut trace)?;
    Ok((state, trace))
}

/// Initial λ for [`LambdaInit::Auto`].
pub fn auto_lambda(obs: &Observations) -> Result<f64> {
    let zero_filled = adjoint_mask(obs.mask(), obs)?;
    let s = Svd::singular_values(&zero_filled)?;
    Ok(0.99 * s.first().copied().unwrap_or(0.0))
}

/// Cooling solve of `min penalty(X)` subject to `‖y − M_Ω(X)‖₂ ≤ σ`.
pub fn solve(obs: &Observations, cfg: &SolverConfig) -> Result<SolveResult> {
    check_inputs(obs, cfg)?;
    let mask = obs.mask();
    let x0 = Matrix::zeros(mask.rows(), mask.cols());
    let mut lambda = match cfg.lambda_init {
        LambdaInit::Auto => auto_lambda(obs)?,
        LambdaInit::Value(l) => l,
    };
    let mut state = SolverState::new(x0, obs, lambda, cfg)?;
    let mut trace = Vec::new();
    if lambda > 0.0 {
        while state.residual > cfg.sigma && state.outer_count < cfg.max_outer {
            inner_loop(&mut state, obs, lambda, cfg, &mut trace)?;
            state.outer_count += 1;
            lambda *= cfg.dec_fac;
        }
    }
    let converged = state.residual <= cfg.sigma;
    Ok(SolveResult { estimate: state.iterate.clone(), converged, state, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{apply_mask, random_mask, SamplingMask, Scheme};

    fn obs_single(value: f64) -> Observations {
        let mask = SamplingMask::from_indices(3, 3, vec![(0, 0)], Scheme::Random, 1.0 / 9.0, 0).unwrap();
        Observations::new(mask, vec![value]).unwrap()
    }

    #[test]
    fn landweber_from_zero_embeds_observations() {
        let x = Matrix::from_fn(4, 4, |i, j| (i + 2 * j) as f64);
        let mask = random_mask(4, 4, 0.5, 3).unwrap();
        let obs = apply_mask(&mask, &x).unwrap();
        let step = landweber_step(&Matrix::zeros(4, 4), &obs, 1.0).unwrap();
        assert_eq!(step, adjoint_mask(&mask, &obs).unwrap());
        // Consistent iterate is a fixed point.
        assert_eq!(landweber_step(&x, &obs, 1.0).unwrap(), x);
    }

    #[test]
    fn landweber_with_alpha_two() {
        let step = landweber_step(&Matrix::zeros(3, 3), &obs_single(4.0), 2.0).unwrap();
        assert_eq!(step[(0, 0)], 2.0);
        assert_eq!(step.frobenius_norm(), 2.0);
    }

    #[test]
    fn landweber_dimension_mismatch() {
        assert!(landweber_step(&Matrix::zeros(2, 3), &obs_single(1.0), 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig { p: 1.5, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { dec_fac: 1.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { alpha: 0.5, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { max_inner: 0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { lambda_init: LambdaInit::Value(0.0), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn sv_update_rank_one_and_zero() {
        let u = Matrix::from_fn(5, 1, |i, _| (i as f64 + 1.0) / 7.416_198_487_095_663);
        let x = u.matmul(&u.transpose()).scaled(10.0);
        let cfg = SolverConfig::shrinkage();
        let obs = apply_mask(&random_mask(5, 5, 1.0, 0).unwrap(), &x).unwrap();
        let mut state = SolverState::new(Matrix::zeros(5, 5), &obs, 2.0, &cfg).unwrap();
        state.lambda = 2.0;
        let out = sv_update(&x, &state, &cfg).unwrap();
        // σ₁ = 10 shrinks to 9 along the same singular vectors.
        let expect = x.scaled(0.9);
        assert!(out.sub(&expect).frobenius_norm() < 1e-12);
        for c in [SolverConfig::shrinkage(), SolverConfig::hard_thresholding(HardRule::Paper), SolverConfig::nonconvex(0.5)] {
            let z = sv_update(&Matrix::zeros(5, 5), &state, &c).unwrap();
            assert_eq!(z.frobenius_norm(), 0.0);
        }
    }

    #[test]
    fn sigma_above_data_norm_stops_at_zero() {
        let x = Matrix::from_fn(6, 6, |i, j| (i * j) as f64);
        let obs = apply_mask(&random_mask(6, 6, 0.5, 1).unwrap(), &x).unwrap();
        let cfg = SolverConfig::shrinkage().with_sigma(obs.norm() + 1e-9);
        let res = solve(&obs, &cfg).unwrap();
        assert!(res.converged);
        assert_eq!(res.state.outer_count, 0);
        assert_eq!(res.estimate.frobenius_norm(), 0.0);
    }

    #[test]
    fn rejects_non_finite_lambda() {
        let obs = obs_single(1.0);
        assert!(solve_fixed_lambda(&obs, Matrix::zeros(3, 3), 0.0, &SolverConfig::default()).is_err());
    }
}
