//! Low-rank and incoherence diagnostics of a field.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::linalg::Svd;
use crate::matrix::Matrix;

/// Relative tolerance (against σ₁) separating numerical zeros.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SvdDiagnostics {
    /// Non-increasing.
    pub singular_values: Vec<f64>,
    /// Largest `|U_ij|` over the first `numeric_rank` left singular vectors.
    pub max_abs_left: f64,
    /// Largest `|V_ij|` over the first `numeric_rank` right singular vectors.
    pub max_abs_right: f64,
    /// `n · max(max_abs_left, max_abs_right)²` with `n = max(rows, cols)`.
    pub coherence_mu: f64,
    pub numeric_rank: usize,
}

/// Full SVD of `values` and the coherence of its top singular subspace.
pub fn diagnose(values: &Matrix, rank_tol: f64) -> Result<SvdDiagnostics> {
    if !values.is_finite() {
        return Err(invalid!("matrix contains non-finite values"));
    }
    if !(rank_tol >= 0.0) {
        return Err(invalid!("rank tolerance must be non-negative, got {rank_tol}"));
    }
    let svd = Svd::compute(values)?;
    let sigma1 = svd.s.first().copied().unwrap_or(0.0);
    if sigma1 == 0.0 {
        return Err(invalid!("zero matrix has no singular subspace"));
    }
    let numeric_rank = svd.s.iter().filter(|&&s| s > rank_tol * sigma1).count();
    let max_abs_left = max_abs_leading(&svd.u, numeric_rank);
    let max_abs_right = max_abs_leading(&svd.v, numeric_rank);
    let n = values.rows().max(values.cols());
    Ok(SvdDiagnostics {
        singular_values: svd.s,
        max_abs_left,
        max_abs_right,
        coherence_mu: coherence_from_maxima(n, max_abs_left, max_abs_right),
        numeric_rank,
    })
}

/// `μ = n · max(left, right)²`.
pub fn coherence_from_maxima(n: usize, max_abs_left: f64, max_abs_right: f64) -> f64 {
    let peak = max_abs_left.max(max_abs_right);
    n as f64 * peak * peak
}

fn max_abs_leading(q: &Matrix, count: usize) -> f64 {
    let mut best = 0.0f64;
    for i in 0..q.rows() {
        for &x in &q.row(i)[..count.min(q.cols())] {
            best = best.max(libm::fabs(x));
        }
    }
    best
}

/// Fraction of `Σσᵢ²` captured by the top `k` singular values.
pub fn energy_fraction(diag: &SvdDiagnostics, k: usize) -> Result<f64> {
    energy_fraction_of(&diag.singular_values, k)
}

pub fn energy_fraction_of(singular_values: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > singular_values.len() {
        return Err(invalid!(
            "k = {k} outside 1..={}",
            singular_values.len()
        ));
    }
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Err(invalid!("energy of a zero spectrum is undefined"));
    }
    if k == singular_values.len() {
        return Ok(1.0);
    }
    let top: f64 = singular_values[..k].iter().map(|s| s * s).sum();
    Ok((top / total).min(1.0))
}
