//! Singular-value update rules.

use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Weights below this fraction of the largest previous singular value are
/// treated as exact zeros by [`nonconvex_shrink`].
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// `max(0, sᵢ − t)`.
pub fn soft_threshold(s: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(invalid!("threshold must be non-negative, got {t}"));
    }
    Ok(s.iter().map(|&x| if x > t { x - t } else { 0.0 }).collect())
}

/// Keeps `sᵢ` when `sᵢ > t` (strictly), zero otherwise.
pub fn hard_threshold(s: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(invalid!("threshold must be non-negative, got {t}"));
    }
    Ok(s.iter().map(|&x| if x > t { x } else { 0.0 }).collect())
}

/// Reweighted shrinkage `sᵢ = s_nextᵢ / (1 + (λ/2α)·s_prevᵢ^(p−2))`.
///
/// Entries whose previous value is at or below `WEIGHT_FLOOR · max(s_prev)`
/// carry an infinite weight and come out as exact zeros.
pub fn nonconvex_shrink(
    s_next: &[f64],
    s_prev: &[f64],
    lambda: f64,
    alpha: f64,
    p: f64,
) -> Result<Vec<f64>> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid!("non-convex shrinkage needs 0 < p < 1, got {p}"));
    }
    if s_next.len() != s_prev.len() {
        return Err(invalid!(
            "spectra differ in length: {} vs {}",
            s_next.len(),
            s_prev.len()
        ));
    }
    if !(lambda >= 0.0) || !(alpha > 0.0) {
        return Err(invalid!("need lambda >= 0 and alpha > 0, got {lambda}, {alpha}"));
    }
    if lambda == 0.0 {
        return Ok(s_next.to_vec());
    }
    let top = s_prev.iter().fold(0.0f64, |m, &x| m.max(libm::fabs(x)));
    let floor = WEIGHT_FLOOR * top;
    let c = lambda / (2.0 * alpha);
    Ok(s_next
        .iter()
        .zip(s_prev)
        .map(|(&z, &prev)| {
            let prev = libm::fabs(prev);
            if prev <= floor {
                0.0
            } else {
                z / (1.0 + c * libm::pow(prev, p - 2.0))
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_cases() {
        let out = soft_threshold(&[3.0, 1.0, 0.2], 0.5).unwrap();
        assert_eq!(out, [2.5, 0.5, 0.0]);
        assert_eq!(soft_threshold(&[3.0, 1.0], 0.0).unwrap(), [3.0, 1.0]);
        assert_eq!(soft_threshold(&[1.0, 1.0], 2.0).unwrap(), [0.0, 0.0]);
        assert!(soft_threshold(&[1.0], -0.1).is_err());
    }

    #[test]
    fn hard_cases() {
        assert_eq!(hard_threshold(&[3.0, 1.0, 0.2], 1.5).unwrap(), [3.0, 0.0, 0.0]);
        assert_eq!(hard_threshold(&[3.0, 1.0, 0.2], 0.0).unwrap(), [3.0, 1.0, 0.2]);
        assert_eq!(hard_threshold(&[2.0], 2.0).unwrap(), [0.0]);
        assert!(hard_threshold(&[1.0], -1.0).is_err());
    }

    #[test]
    fn nonconvex_cases() {
        assert_eq!(nonconvex_shrink(&[2.0, 0.5], &[1.0, 0.0], 0.0, 1.0, 0.5).unwrap(), [2.0, 0.5]);
        // D = 2^-1.5; 2 / (1 + 0.5 D), frozen from an independent evaluation.
        let out = nonconvex_shrink(&[2.0], &[2.0], 1.0, 1.0, 0.5).unwrap();
        assert!((out[0] - 1.699_557_790_355_330_3).abs() < 1e-12, "{}", out[0]);
        let out = nonconvex_shrink(&[2.0, 1.0], &[2.0, 0.0], 1.0, 1.0, 0.5).unwrap();
        assert_eq!(out[1], 0.0);
        assert!(nonconvex_shrink(&[1.0], &[1.0], 1.0, 1.0, 1.0).is_err());
        assert!(nonconvex_shrink(&[1.0], &[1.0], 1.0, 1.0, 0.0).is_err());
        assert!(nonconvex_shrink(&[1.0, 2.0], &[1.0], 1.0, 1.0, 0.5).is_err());
    }
}
