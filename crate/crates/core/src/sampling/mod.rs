//! Observation patterns on the sensor grid and the masking operator.
//!
//! A [`SamplingMask`] is the set Ω of active sensors. Every generator hits
//! `round(ratio · rows · cols)` cells exactly (ties to even) and is a pure
//! function of its arguments and seed. Cells are stored in row-major order,
//! which is also the order of [`Observations::values`].

mod farthest;
mod halton;
mod quasicrystal;

use core::fmt;
use core::str::FromStr;

use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

pub use farthest::farthest_point_mask;
pub use halton::{quasi_random_mask, radical_inverse};
pub use quasicrystal::{fibonacci_chain, quasi_crystal_mask};

/// Pattern family a mask was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scheme {
    Random,
    QuasiRandom,
    QuasiCrystal,
    FarthestPoint,
}

impl Scheme {
    pub const ALL: [Scheme; 4] =
        [Scheme::QuasiRandom, Scheme::QuasiCrystal, Scheme::FarthestPoint, Scheme::Random];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Random => "random",
            Scheme::QuasiRandom => "quasi_random",
            Scheme::QuasiCrystal => "quasi_crystal",
            Scheme::FarthestPoint => "farthest_point",
        }
    }

    /// Blue-noise families, i.e. everything but uniform random.
    pub fn is_blue_noise(self) -> bool {
        self != Scheme::Random
    }

    pub fn generate(self, rows: usize, cols: usize, ratio: f64, seed: u64) -> Result<SamplingMask> {
        match self {
            Scheme::Random => random_mask(rows, cols, ratio, seed),
            Scheme::QuasiRandom => quasi_random_mask(rows, cols, ratio, seed),
            Scheme::QuasiCrystal => quasi_crystal_mask(rows, cols, ratio, seed),
            Scheme::FarthestPoint => farthest_point_mask(rows, cols, ratio, seed),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "random" => Ok(Scheme::Random),
            "quasi_random" | "halton" => Ok(Scheme::QuasiRandom),
            "quasi_crystal" => Ok(Scheme::QuasiCrystal),
            "farthest_point" | "farthest" => Ok(Scheme::FarthestPoint),
            _ => Err(invalid!("unknown sampling scheme {s:?}")),
        }
    }
}

/// The observed index set Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    rows: usize,
    cols: usize,
    indices: Vec<(usize, usize)>,
    scheme: Scheme,
    target_ratio: f64,
    seed: u64,
}

impl SamplingMask {
    /// Builds a mask from explicit cells, sorting them row-major.
    ///
    /// Fails on duplicates, out-of-bounds cells, or an empty set.
    pub fn from_indices(
        rows: usize,
        cols: usize,
        mut indices: Vec<(usize, usize)>,
        scheme: Scheme,
        target_ratio: f64,
        seed: u64,
    ) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid!("mask must contain at least one cell"));
        }
        if let Some(&(r, c)) = indices.iter().find(|&&(r, c)| r >= rows || c >= cols) {
            return Err(invalid!("cell ({r},{c}) outside {rows}x{cols} grid"));
        }
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid!("duplicate cell ({},{})", w[0].0, w[0].1));
        }
        Ok(Self { rows, cols, indices, scheme, target_ratio, seed })
    }

    fn from_flags(rows: usize, cols: usize, taken: &[bool], scheme: Scheme, ratio: f64, seed: u64) -> Self {
        let indices = taken
            .iter()
            .enumerate()
            .filter(|(_, &t)| t)
            .map(|(k, _)| (k / cols, k % cols))
            .collect();
        Self { rows, cols, indices, scheme, target_ratio: ratio, seed }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn target_ratio(&self) -> f64 {
        self.target_ratio
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Dense 0/1 indicator of Ω.
    pub fn indicator(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for &(r, c) in &self.indices {
            m[(r, c)] = 1.0;
        }
        m
    }
}

/// Sampled values `y = M_Ω(X)` together with their mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    mask: SamplingMask,
    values: Vec<f64>,
}

impl Observations {
    pub fn new(mask: SamplingMask, values: Vec<f64>) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(invalid!(
                "{} observations for a mask of {} cells",
                values.len(),
                mask.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid!("observations must be finite"));
        }
        Ok(Self { mask, values })
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `‖y‖₂`.
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }
}

/// Number of cells a mask of `ratio` must contain.
pub fn target_count(rows: usize, cols: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(invalid!("sampling ratio must lie in (0, 1], got {ratio}"));
    }
    if rows == 0 || cols == 0 {
        return Err(invalid!("grid must be non-empty, got {rows}x{cols}"));
    }
    let total = rows * cols;
    let m = libm::rint(ratio * total as f64) as usize;
    if m == 0 {
        return Err(invalid!("ratio {ratio} selects no cell of a {rows}x{cols} grid"));
    }
    Ok(m.min(total))
}

/// `m` cells drawn uniformly without replacement.
pub fn random_mask(rows: usize, cols: usize, ratio: f64, seed: u64) -> Result<SamplingMask> {
    let m = target_count(rows, cols, ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = vec![false; rows * cols];
    for k in rand::seq::index::sample(&mut rng, rows * cols, m) {
        taken[k] = true;
    }
    Ok(SamplingMask::from_flags(rows, cols, &taken, Scheme::Random, ratio, seed))
}

/// Completes a partially filled flag grid to exactly `m` cells by visiting the
/// untaken cells in a seeded random order.
pub(crate) fn fill_remaining(taken: &mut [bool], count: &mut usize, m: usize, seed: u64) {
    if *count >= m {
        return;
    }
    let free: Vec<usize> = (0..taken.len()).filter(|&k| !taken[k]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in rand::seq::index::sample(&mut rng, free.len(), m - *count) {
        taken[free[k]] = true;
        *count += 1;
    }
}

/// `M_Ω(X)` in row-major Ω order.
pub fn apply_mask(mask: &SamplingMask, field: &Matrix) -> Result<Observations> {
    if field.shape() != (mask.rows, mask.cols) {
        return Err(invalid!(
            "mask is {}x{} but matrix is {}x{}",
            mask.rows,
            mask.cols,
            field.rows(),
            field.cols()
        ));
    }
    let values = mask.indices.iter().map(|&ij| field[ij]).collect();
    Observations::new(mask.clone(), values)
}

/// `M_Ωᵀ(y)`: zero-filled matrix with the observations scattered to Ω.
pub fn adjoint_mask(mask: &SamplingMask, obs: &Observations) -> Result<Matrix> {
    if obs.mask.rows != mask.rows || obs.mask.cols != mask.cols || obs.mask.indices != mask.indices {
        return Err(invalid!("observations were taken with a different mask"));
    }
    let mut out = Matrix::zeros(mask.rows, mask.cols);
    for (&ij, &v) in mask.indices.iter().zip(&obs.values) {
        out[ij] = v;
    }
    Ok(out)
}

/// Row/column coverage and spacing of a mask. Purely diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverageReport {
    pub empty_rows: usize,
    pub empty_cols: usize,
    /// Smallest Euclidean distance between two selected cells; infinite for
    /// a single-cell mask.
    pub min_pairwise_distance: f64,
}

pub fn coverage_report(mask: &SamplingMask) -> CoverageReport {
    let mut row_hit = vec![false; mask.rows];
    let mut col_hit = vec![false; mask.cols];
    for &(r, c) in &mask.indices {
        row_hit[r] = true;
        col_hit[c] = true;
    }
    CoverageReport {
        empty_rows: row_hit.iter().filter(|h| !**h).count(),
        empty_cols: col_hit.iter().filter(|h| !**h).count(),
        min_pairwise_distance: min_pairwise_distance(&mask.indices),
    }
}

/// Brute-force minimum Euclidean distance over all pairs of cells.
pub fn min_pairwise_distance(cells: &[(usize, usize)]) -> f64 {
    let mut best = u64::MAX;
    for (a, &(r1, c1)) in cells.iter().enumerate() {
        for &(r2, c2) in &cells[a + 1..] {
            let dr = r1.abs_diff(r2) as u64;
            let dc = c1.abs_diff(c2) as u64;
            best = best.min(dr * dr + dc * dc);
        }
    }
    if best == u64::MAX {
        f64::INFINITY
    } else {
        libm::sqrt(best as f64)
    }
}
