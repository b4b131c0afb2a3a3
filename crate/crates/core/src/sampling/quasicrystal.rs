//! Quasi-crystal patterns by cut-and-project.
//!
//! Each axis carries a Fibonacci chain: the projection of the points of `Z²`
//! lying in a strip of golden-ratio slope. Its gaps take two lengths with
//! ratio φ in an aperiodic order, and the product of two chains is a
//! quasiperiodic planar point set with a hard minimum separation. The set is
//! rotated off the grid axes so that rows and columns are not left empty,
//! scaled to the requested density, and rasterized to cells.

use alloc::vec;
use alloc::vec::Vec;

use super::{fill_remaining, target_count, SamplingMask, Scheme};
use crate::error::Result;
use crate::seed::{substream, unit_from_seed};

const PHI: f64 = 1.618_033_988_749_895;
/// Mean gap of the chain, `1 + 1/φ²`.
const MEAN_GAP: f64 = 1.0 + 1.0 / (PHI * PHI);
/// Scale shrink per refinement step while searching for the density.
const SHRINK: f64 = 0.997;
const MAX_STEPS: usize = 4000;
/// Rotation of the pattern off the grid axes, in radians. Angles tied to φ
/// project the chains onto few rows and leave others empty.
const ROTATION: f64 = 0.5;

/// Position of the `k`-th point of a Fibonacci chain with window `phase`.
///
/// Gaps are `1` or `φ`.
pub fn fibonacci_chain(k: i64, phase: f64) -> f64 {
    k as f64 + libm::floor((k as f64 + phase) / PHI) / PHI
}

struct Window {
    phase_row: f64,
    phase_col: f64,
    shift_row: f64,
    shift_col: f64,
    cos: f64,
    sin: f64,
}

impl Window {
    fn from_seed(seed: u64) -> Self {
        Self {
            phase_row: PHI * unit_from_seed(substream(seed, 1)),
            phase_col: PHI * unit_from_seed(substream(seed, 2)),
            shift_row: MEAN_GAP * unit_from_seed(substream(seed, 3)),
            shift_col: MEAN_GAP * unit_from_seed(substream(seed, 4)),
            cos: libm::cos(ROTATION),
            sin: libm::sin(ROTATION),
        }
    }

    /// Marks the cells hit by the pattern at `scale` (grid cells per chain unit).
    fn rasterize(&self, rows: usize, cols: usize, scale: f64, taken: &mut [bool]) -> usize {
        taken.iter_mut().for_each(|t| *t = false);
        let half_r = rows as f64 / 2.0;
        let half_c = cols as f64 / 2.0;
        let reach = libm::sqrt(half_r * half_r + half_c * half_c) / scale + MEAN_GAP;
        let k_max = libm::ceil(reach) as i64 + 3;
        let row_chain: Vec<f64> =
            (-k_max..=k_max).map(|k| fibonacci_chain(k, self.phase_row) + self.shift_row).collect();
        let col_chain: Vec<f64> =
            (-k_max..=k_max).map(|k| fibonacci_chain(k, self.phase_col) + self.shift_col).collect();
        let mut count = 0;
        for &pa in &row_chain {
            for &pb in &col_chain {
                let r = half_r + scale * (self.cos * pa - self.sin * pb);
                let c = half_c + scale * (self.sin * pa + self.cos * pb);
                if r < 0.0 || c < 0.0 || r >= rows as f64 || c >= cols as f64 {
                    continue;
                }
                let k = (r as usize) * cols + c as usize;
                if !taken[k] {
                    taken[k] = true;
                    count += 1;
                }
            }
        }
        count
    }
}

/// Quasi-crystal pattern with exactly `round(ratio·rows·cols)` cells.
///
/// The scale starts slightly coarser than the target density and shrinks
/// until enough distinct cells are hit; the few surplus cells are dropped
/// from the most crowded spots.
pub fn quasi_crystal_mask(rows: usize, cols: usize, ratio: f64, seed: u64) -> Result<SamplingMask> {
    let m = target_count(rows, cols, ratio)?;
    let window = Window::from_seed(seed);
    let mut taken = vec![false; rows * cols];
    let mut scale = 1.1 * libm::sqrt((rows * cols) as f64 / m as f64) / MEAN_GAP;
    let mut count = 0;
    for _ in 0..MAX_STEPS {
        count = window.rasterize(rows, cols, scale, &mut taken);
        if count >= m {
            break;
        }
        scale *= SHRINK;
    }
    if count < m {
        fill_remaining(&mut taken, &mut count, m, substream(seed, 0x5143));
    }
    if count > m {
        drop_crowded(&mut taken, cols, count - m);
    }
    Ok(SamplingMask::from_flags(rows, cols, &taken, Scheme::QuasiCrystal, ratio, seed))
}

/// Unselects `excess` cells with the smallest nearest-neighbour distance.
fn drop_crowded(taken: &mut [bool], cols: usize, excess: usize) {
    let cells: Vec<(usize, usize)> =
        (0..taken.len()).filter(|&k| taken[k]).map(|k| (k / cols, k % cols)).collect();
    let mut nearest: Vec<(u64, usize)> = cells
        .iter()
        .enumerate()
        .map(|(a, &(r1, c1))| {
            let d = cells
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(_, &(r2, c2))| {
                    let dr = r1.abs_diff(r2) as u64;
                    let dc = c1.abs_diff(c2) as u64;
                    dr * dr + dc * dc
                })
                .min()
                .unwrap_or(u64::MAX);
            (d, a)
        })
        .collect();
    nearest.sort_unstable();
    for &(_, a) in nearest.iter().take(excess) {
        let (r, c) = cells[a];
        taken[r * cols + c] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_gaps_are_one_or_phi() {
        for k in -50..50 {
            let gap = fibonacci_chain(k + 1, 0.3) - fibonacci_chain(k, 0.3);
            assert!((gap - 1.0).abs() < 1e-12 || (gap - PHI).abs() < 1e-12, "gap {gap}");
        }
    }

    #[test]
    fn chain_is_not_periodic() {
        let gaps: Vec<bool> =
            (0..200).map(|k| fibonacci_chain(k + 1, 0.0) - fibonacci_chain(k, 0.0) > 1.5).collect();
        for period in 1..60 {
            assert!(gaps.iter().zip(&gaps[period..]).any(|(a, b)| a != b), "period {period}");
        }
    }

    #[test]
    fn exact_count_and_determinism() {
        assert_eq!(quasi_crystal_mask(64, 64, 0.2, 9).unwrap().len(), 819);
        for ratio in [0.05, 0.1, 0.3, 0.5, 0.77, 1.0] {
            let m = target_count(64, 64, ratio).unwrap();
            assert_eq!(quasi_crystal_mask(64, 64, ratio, 2).unwrap().len(), m);
        }
        assert_eq!(quasi_crystal_mask(16, 24, 0.3, 4).unwrap().len(), 115);
        assert_eq!(quasi_crystal_mask(64, 64, 0.1, 1).unwrap(), quasi_crystal_mask(64, 64, 0.1, 1).unwrap());
        assert_ne!(quasi_crystal_mask(64, 64, 0.1, 1).unwrap(), quasi_crystal_mask(64, 64, 0.1, 2).unwrap());
    }

    #[test]
    fn covers_rows_and_columns() {
        let mask = quasi_crystal_mask(64, 64, 0.1, 3).unwrap();
        let rep = super::super::coverage_report(&mask);
        assert_eq!(rep.empty_rows, 0);
        assert_eq!(rep.empty_cols, 0);
    }
}
