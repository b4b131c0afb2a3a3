//! Synthetic spatially correlated sensor fields.
//!
//! Fields are zero-mean Gaussian random fields on the grid with a separable
//! exponential covariance `exp(-|i-i'|/ℓ) · exp(-|j-j'|/ℓ)`. Sampling goes
//! through the Kronecker structure: with `K_r = L_r L_rᵀ` and
//! `K_c = L_c L_cᵀ`, `X = L_r Z L_cᵀ` for i.i.d. standard normal `Z` has
//! exactly that covariance, so only two small Cholesky factors are needed.

use core::fmt;
use core::str::FromStr;

use alloc::string::String;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::cholesky_with_jitter;
use crate::matrix::Matrix;

/// Correlation length of the `Low` preset, in grid cells. The three presets
/// come from `examples/calibrate.rs` (mean top-6 energy 0.95, 0.99, 0.999 at
/// n = 64 over 100 seeds).
pub const LENGTH_SCALE_LOW: f64 = 13.5;
/// Correlation length of the `Medium` preset, in grid cells.
pub const LENGTH_SCALE_MEDIUM: f64 = 37.7;
/// Correlation length of the `High` preset, in grid cells.
pub const LENGTH_SCALE_HIGH: f64 = 171.3;

/// Spatial correlation preset of a generated field.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CorrelationLevel {
    Low,
    Medium,
    High,
    /// Explicit correlation length in grid cells.
    Custom(f64),
}

impl CorrelationLevel {
    pub const PRESETS: [CorrelationLevel; 3] =
        [CorrelationLevel::Low, CorrelationLevel::Medium, CorrelationLevel::High];

    pub fn length_scale(self) -> f64 {
        match self {
            CorrelationLevel::Low => LENGTH_SCALE_LOW,
            CorrelationLevel::Medium => LENGTH_SCALE_MEDIUM,
            CorrelationLevel::High => LENGTH_SCALE_HIGH,
            CorrelationLevel::Custom(l) => l,
        }
    }
}

impl fmt::Display for CorrelationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrelationLevel::Low => f.write_str("low"),
            CorrelationLevel::Medium => f.write_str("medium"),
            CorrelationLevel::High => f.write_str("high"),
            CorrelationLevel::Custom(l) => write!(f, "custom:{l}"),
        }
    }
}

impl FromStr for CorrelationLevel {
    type Err = Error;

    /// Accepts `low`, `medium`, `high`, `custom:<ℓ>` or a bare positive length.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "low" => Ok(CorrelationLevel::Low),
            "medium" => Ok(CorrelationLevel::Medium),
            "high" => Ok(CorrelationLevel::High),
            other => {
                let num = other.strip_prefix("custom:").unwrap_or(other);
                match num.parse::<f64>() {
                    Ok(l) if l > 0.0 && l.is_finite() => Ok(CorrelationLevel::Custom(l)),
                    _ => Err(invalid!("unknown correlation level {s:?}")),
                }
            }
        }
    }
}

/// Ground-truth grid of sensor readings.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub values: Matrix,
    pub seed: u64,
    pub correlation: CorrelationLevel,
}

impl GridField {
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    /// Root-mean-square entry, `‖X‖_F / sqrt(rows·cols)`.
    pub fn rms(&self) -> f64 {
        let count = (self.rows() * self.cols()) as f64;
        self.values.frobenius_norm() / libm::sqrt(count)
    }
}

/// 1-D exponential covariance `K[i][j] = exp(-|i-j|/ℓ)`.
pub fn exponential_covariance(len: usize, length_scale: f64) -> Matrix {
    Matrix::from_fn(len, len, |i, j| {
        let d = if i > j { i - j } else { j - i } as f64;
        if d == 0.0 {
            1.0
        } else {
            libm::exp(-d / length_scale)
        }
    })
}

/// Square `n × n` field.
pub fn generate_field(n: usize, level: CorrelationLevel, seed: u64) -> Result<GridField> {
    generate_field_rect(n, n, level, seed)
}

pub fn generate_field_rect(
    rows: usize,
    cols: usize,
    level: CorrelationLevel,
    seed: u64,
) -> Result<GridField> {
    if rows < 2 || cols < 2 {
        return Err(invalid!("field must be at least 2x2, got {rows}x{cols}"));
    }
    let ell = level.length_scale();
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(invalid!("correlation length must be positive, got {ell}"));
    }
    let lr = cholesky_with_jitter(&exponential_covariance(rows, ell))?;
    let lc = if cols == rows {
        lr.clone()
    } else {
        cholesky_with_jitter(&exponential_covariance(cols, ell))?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
    let values = lr.matmul(&z).matmul(&lc.transpose());
    Ok(GridField { values, seed, correlation: level })
}

/// Adds i.i.d. Gaussian noise with standard deviation `noise_level · rms(field)`.
pub fn add_noise(field: &GridField, noise_level: f64, seed: u64) -> Result<GridField> {
    if !(noise_level >= 0.0) || !noise_level.is_finite() {
        return Err(invalid!("noise level must be a non-negative number, got {noise_level}"));
    }
    if noise_level == 0.0 {
        return Ok(field.clone());
    }
    let std = noise_level * field.rms();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = field.values.clone();
    for v in values.as_mut_slice() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += std * z;
    }
    Ok(GridField { values, seed: field.seed, correlation: field.correlation })
}

/// Human-readable listing of the preset correlation lengths.
pub fn preset_summary() -> String {
    alloc::format!(
        "low={LENGTH_SCALE_LOW} medium={LENGTH_SCALE_MEDIUM} high={LENGTH_SCALE_HIGH}"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_grid() {
        assert!(matches!(
            generate_field(1, CorrelationLevel::High, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn deterministic_in_seed() {
        let a = generate_field(64, CorrelationLevel::High, 1).unwrap();
        let b = generate_field(64, CorrelationLevel::High, 1).unwrap();
        assert_eq!(a.values.as_slice(), b.values.as_slice());
        let c = generate_field(64, CorrelationLevel::High, 2).unwrap();
        assert_ne!(a.values.as_slice(), c.values.as_slice());
    }

    #[test]
    fn near_zero_length_gives_independent_cells() {
        // 10^4 fields of 4x4; correlation of horizontally adjacent cells.
        let level = CorrelationLevel::Custom(1e-3);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        let (mut sx, mut sy, mut count) = (0.0, 0.0, 0.0);
        for seed in 0..10_000u64 {
            let f = generate_field(4, level, seed.wrapping_add(7)).unwrap();
            for i in 0..4 {
                for j in 0..3 {
                    let x = f.values[(i, j)];
                    let y = f.values[(i, j + 1)];
                    sx += x;
                    sy += y;
                    sxy += x * y;
                    sxx += x * x;
                    syy += y * y;
                    count += 1.0;
                }
            }
        }
        let cov = sxy / count - (sx / count) * (sy / count);
        let corr = cov / libm::sqrt((sxx / count - (sx / count).powi(2)) * (syy / count - (sy / count).powi(2)));
        assert!(corr.abs() < 0.1, "adjacent correlation {corr}");
        assert!((sxx / count - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_noise_is_identity() {
        let f = generate_field(8, CorrelationLevel::Medium, 3).unwrap();
        assert_eq!(add_noise(&f, 0.0, 99).unwrap(), f);
    }

    #[test]
    fn negative_noise_rejected() {
        let f = generate_field(8, CorrelationLevel::Medium, 3).unwrap();
        assert!(add_noise(&f, -0.1, 0).is_err());
    }

    #[test]
    fn noise_std_matches_level() {
        let f = generate_field(64, CorrelationLevel::Low, 11).unwrap();
        let noisy = add_noise(&f, 0.10, 5).unwrap();
        let diff = noisy.values.sub(&f.values);
        let n = diff.as_slice().len() as f64;
        let mean = diff.as_slice().iter().sum::<f64>() / n;
        let var = diff.as_slice().iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let want = 0.10 * f.rms();
        assert!((libm::sqrt(var) - want).abs() < 0.03 * want);
        assert_eq!(add_noise(&f, 0.05, 5).unwrap(), add_noise(&f, 0.05, 5).unwrap());
    }

    #[test]
    fn level_parsing() {
        assert_eq!("High".parse::<CorrelationLevel>().unwrap(), CorrelationLevel::High);
        assert_eq!("custom:2.5".parse::<CorrelationLevel>().unwrap(), CorrelationLevel::Custom(2.5));
        assert!("warm".parse::<CorrelationLevel>().is_err());
        assert!("-1".parse::<CorrelationLevel>().is_err());
    }
}
