use alloc::vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{target_count, SamplingMask, Scheme};
use crate::error::Result;

/// Greedy farthest-point traversal of the grid.
///
/// The first cell is uniform from the seed; each next cell maximizes the
/// distance to the nearest selected cell, ties going to the smallest
/// row-major index. Distances are compared as exact integer squares.
pub fn farthest_point_mask(rows: usize, cols: usize, ratio: f64, seed: u64) -> Result<SamplingMask> {
    let m = target_count(rows, cols, ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..rows * cols);
    let taken = farthest_point_order(rows, cols, first, m);
    Ok(SamplingMask::from_flags(rows, cols, &taken, Scheme::FarthestPoint, ratio, seed))
}

/// Runs the traversal from `first` and returns the selection flags.
pub(crate) fn farthest_point_order(rows: usize, cols: usize, first: usize, m: usize) -> alloc::vec::Vec<bool> {
    let total = rows * cols;
    let mut taken = vec![false; total];
    let mut nearest = vec![u64::MAX; total];
    let mut next = first;
    for _ in 0..m {
        taken[next] = true;
        let (nr, nc) = (next / cols, next % cols);
        let mut best = 0u64;
        let mut best_k = usize::MAX;
        for k in 0..total {
            if taken[k] {
                nearest[k] = 0;
                continue;
            }
            let dr = (k / cols).abs_diff(nr) as u64;
            let dc = (k % cols).abs_diff(nc) as u64;
            let d = dr * dr + dc * dc;
            if d < nearest[k] {
                nearest[k] = d;
            }
            if nearest[k] > best {
                best = nearest[k];
                best_k = k;
            }
        }
        if best_k == usize::MAX {
            break;
        }
        next = best_k;
    }
    taken
}
