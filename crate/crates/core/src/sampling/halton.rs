use alloc::vec;

use super::{fill_remaining, target_count, SamplingMask, Scheme};
use crate::error::Result;
use crate::seed::{splitmix64, substream};

/// Candidate points drawn per requested cell before falling back to a fill.
const OVERSAMPLE: usize = 64;

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(base: u64, mut index: u64) -> f64 {
    debug_assert!(base >= 2);
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    out
}

/// 2-D Halton pattern (bases 2 and 3) starting at a seed-derived index.
///
/// Points land in cell `(floor(x·rows), floor(y·cols))`; points hitting an
/// already selected cell are skipped.
pub fn quasi_random_mask(rows: usize, cols: usize, ratio: f64, seed: u64) -> Result<SamplingMask> {
    let m = target_count(rows, cols, ratio)?;
    let mut taken = vec![false; rows * cols];
    let mut count = 0;
    let start = 1 + (splitmix64(seed) % (1 << 20));
    let budget = (OVERSAMPLE * rows * cols) as u64;
    let mut index = start;
    while count < m && index - start < budget {
        let x = radical_inverse(2, index);
        let y = radical_inverse(3, index);
        index += 1;
        let r = ((x * rows as f64) as usize).min(rows - 1);
        let c = ((y * cols as f64) as usize).min(cols - 1);
        let k = r * cols + c;
        if !taken[k] {
            taken[k] = true;
            count += 1;
        }
    }
    fill_remaining(&mut taken, &mut count, m, substream(seed, 0x4841_4C54));
    Ok(SamplingMask::from_flags(rows, cols, &taken, Scheme::QuasiRandom, ratio, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn van_der_corput_base_two() {
        assert_eq!(radical_inverse(2, 1), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(2, 3), 0.75);
        assert!((radical_inverse(3, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((radical_inverse(3, 5) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn exact_count() {
        assert_eq!(quasi_random_mask(64, 64, 0.3, 5).unwrap().len(), 1229);
        assert_eq!(quasi_random_mask(64, 64, 1.0, 5).unwrap().len(), 4096);
        assert_eq!(quasi_random_mask(7, 9, 0.77, 1).unwrap().len(), 49);
    }

    #[test]
    fn quadrants_are_balanced() {
        for seed in 0..10 {
            let mask = quasi_random_mask(64, 64, 0.5, seed).unwrap();
            let mut blocks = [0usize; 16];
            for &(r, c) in mask.indices() {
                blocks[(r / 16) * 4 + c / 16] += 1;
            }
            let expect = mask.len() as f64 / 16.0;
            for b in blocks {
                assert!((b as f64 - expect).abs() <= 0.25 * expect, "seed {seed}: {blocks:?}");
            }
        }
    }
}
