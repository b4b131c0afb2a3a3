use alloc::vec;
use alloc::vec::Vec;

use crate::error::{numerical, Result};
use crate::matrix::Matrix;

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
///
/// `u` is `rows × k`, `v` is `cols × k` with `k = min(rows, cols)`, and `s`
/// is sorted non-increasing. Columns of `u` belonging to zero singular values
/// are left as zero vectors.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    /// One-sided (Hestenes) Jacobi SVD from scratch.
    pub fn compute(a: &Matrix) -> Result<Self> {
        Self::compute_inner(a, None)
    }

    /// Jacobi SVD seeded with the singular vectors of a nearby matrix.
    ///
    /// Rotating `A` by the previous right factor first leaves nearly
    /// orthogonal columns, so the sweeps converge in one or two passes when
    /// the iterate changes slowly (as it does inside the solvers).
    pub fn compute_warm(a: &Matrix, previous: &Svd) -> Result<Self> {
        let (m, n) = a.shape();
        let hint = if m >= n { &previous.v } else { &previous.u };
        let k = m.min(n);
        if hint.shape() != (k, k) {
            return Self::compute_inner(a, None);
        }
        Self::compute_inner(a, Some(hint))
    }

    fn compute_inner(a: &Matrix, hint: Option<&Matrix>) -> Result<Self> {
        let (m, n) = a.shape();
        let svd = if m >= n {
            let (u, s, v) = jacobi_tall(a, hint)?;
            Self { u, s, v }
        } else {
            let (v, s, u) = jacobi_tall(&a.transpose(), hint)?;
            Self { u, s, v }
        };
        // Entries near f64::MAX overflow the column norms.
        if svd.s.iter().any(|x| !x.is_finite()) {
            return Err(numerical!("SVD produced non-finite singular values"));
        }
        Ok(svd)
    }

    /// Singular values only, from scratch.
    pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
        Ok(Self::compute(a)?.s)
    }

    /// `U diag(s) Vᵀ` for an arbitrary replacement spectrum.
    ///
    /// Zero entries of `s` are skipped, so low-rank spectra are cheap.
    pub fn reconstruct_with(&self, s: &[f64]) -> Matrix {
        let m = self.u.rows();
        let n = self.v.rows();
        let mut out = Matrix::zeros(m, n);
        let k = s.len().min(self.s.len());
        let active: Vec<usize> = (0..k).filter(|&r| s[r] != 0.0).collect();
        if active.is_empty() {
            return out;
        }
        // Rows of `vt` are the active right singular vectors.
        let mut vt = vec![0.0; active.len() * n];
        for j in 0..n {
            let vrow = self.v.row(j);
            for (a, &r) in active.iter().enumerate() {
                vt[a * n + j] = vrow[r];
            }
        }
        let data = out.as_mut_slice();
        for i in 0..m {
            let urow = self.u.row(i);
            let row = &mut data[i * n..(i + 1) * n];
            for (a, &r) in active.iter().enumerate() {
                let ui = urow[r] * s[r];
                if ui == 0.0 {
                    continue;
                }
                for (o, v) in row.iter_mut().zip(&vt[a * n..(a + 1) * n]) {
                    *o += ui * v;
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(&self.s)
    }
}

/// Jacobi on a matrix with at least as many rows as columns.
fn jacobi_tall(a: &Matrix, hint: Option<&Matrix>) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let (m, n) = a.shape();
    // Each working column stores a column of `B = A V` followed by the
    // matching column of `V`, so one rotation updates both.
    let stride = m + n;
    let mut w = vec![0.0; stride * n];
    match hint {
        Some(h) => {
            let ht = h.transpose();
            for j in 0..n {
                let vj = ht.row(j);
                let cj = &mut w[j * stride..(j + 1) * stride];
                for i in 0..m {
                    cj[i] = dot(a.row(i), vj);
                }
                cj[m..].copy_from_slice(vj);
            }
        }
        None => {
            for j in 0..n {
                let cj = &mut w[j * stride..(j + 1) * stride];
                for i in 0..m {
                    cj[i] = a[(i, j)];
                }
                cj[m + j] = 1.0;
            }
        }
    }

    let tol = (m as f64) * f64::EPSILON;
    let mut norms: Vec<f64> = (0..n).map(|j| sq_norm(&w, stride, m, j)).collect();
    let scale = norms.iter().cloned().fold(0.0, f64::max);
    // Columns below this are numerically zero and never rotated.
    let negligible = scale * f64::EPSILON * f64::EPSILON;
    let top = libm::sqrt(scale);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        sort_columns(&mut w, &mut norms, stride);
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let (cp, cq) = pair(&mut w, stride, p, q);
                let gamma = dot(&cp[..m], &cq[..m]);
                // Either relatively orthogonal, or the coupling is below the
                // absolute resolution `tol · σ₁` of the larger column.
                let g = libm::fabs(gamma);
                if g <= tol * libm::sqrt(alpha * beta) || g <= tol * top * libm::sqrt(alpha.max(beta)) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(cp, cq, c, s);
                norms[p] = alpha - t * gamma;
                norms[q] = beta + t * gamma;
            }
        }
        // Refresh to keep the incremental updates from drifting.
        for (j, nj) in norms.iter_mut().enumerate() {
            *nj = sq_norm(&w, stride, m, j);
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(numerical!("Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sv: Vec<f64> = norms.iter().map(|x| libm::sqrt(*x)).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap_or(core::cmp::Ordering::Equal).then(i.cmp(&j)));

    let mut u_out = Matrix::zeros(m, n);
    let mut v_out = Matrix::zeros(n, n);
    let mut s_out = Vec::with_capacity(n);
    let floor = libm::sqrt(negligible);
    for (r, &j) in order.iter().enumerate() {
        let sj = sv[j];
        s_out.push(sj);
        let cj = &w[j * stride..(j + 1) * stride];
        if sj > floor && sj > 0.0 {
            let inv = 1.0 / sj;
            for (i, x) in cj[..m].iter().enumerate() {
                u_out[(i, r)] = x * inv;
            }
        }
        for (i, x) in cj[m..].iter().enumerate() {
            v_out[(i, r)] = *x;
        }
    }
    Ok((u_out, s_out, v_out))
}

/// Reorders working columns by decreasing norm, which speeds up
/// convergence of the cyclic sweep.
fn sort_columns(w: &mut Vec<f64>, norms: &mut Vec<f64>, stride: usize) {
    let n = norms.len();
    if norms.windows(2).all(|x| x[0] >= x[1]) {
        return;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(core::cmp::Ordering::Equal));
    let mut sorted = Vec::with_capacity(w.len());
    for &j in &order {
        sorted.extend_from_slice(&w[j * stride..(j + 1) * stride]);
    }
    *norms = order.iter().map(|&j| norms[j]).collect();
    *w = sorted;
}

#[inline]
fn pair(w: &mut [f64], stride: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (head, tail) = w.split_at_mut(q * stride);
    (&mut head[p * stride..(p + 1) * stride], &mut tail[..stride])
}

#[inline]
fn sq_norm(w: &[f64], stride: usize, m: usize, j: usize) -> f64 {
    let c = &w[j * stride..j * stride + m];
    dot(c, c)
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    // Independent lanes let the compiler vectorize the reduction.
    let mut acc = [0.0; 8];
    let xc = x.chunks_exact(8);
    let yc = y.chunks_exact(8);
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for l in 0..8 {
            acc[l] += a[l] * b[l];
        }
    }
    let mut tail = 0.0;
    for (a, b) in xr.iter().zip(yr) {
        tail += a * b;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let xp = *a;
        let yq = *b;
        *a = c * xp - s * yq;
        *b = s * xp + c * yq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn assert_orthonormal_cols(q: &Matrix, tol: f64) {
        let g = q.transpose().matmul(q);
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < tol, "gram[{i},{j}] = {}", g[(i, j)]);
            }
        }
    }

    #[test]
    fn reconstructs_square_tall_and_wide() {
        for &(r, c) in &[(8, 8), (12, 5), (5, 12), (64, 64)] {
            let a = random(r, c, 3);
            let svd = Svd::compute(&a).unwrap();
            let err = svd.reconstruct().sub(&a).frobenius_norm();
            assert!(err <= 1e-12 * a.frobenius_norm(), "{r}x{c}: {err}");
            assert_orthonormal_cols(&svd.u, 1e-12);
            assert_orthonormal_cols(&svd.v, 1e-12);
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn warm_start_matches_cold() {
        let a = random(20, 20, 9);
        let cold = Svd::compute(&a).unwrap();
        let mut b = a.clone();
        b[(3, 4)] += 1e-3;
        let warm = Svd::compute_warm(&b, &cold).unwrap();
        let reference = Svd::compute(&b).unwrap();
        for (x, y) in warm.s.iter().zip(&reference.s) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(warm.reconstruct().sub(&b).frobenius_norm() < 1e-12 * b.frobenius_norm());
    }

    #[test]
    fn overflow_is_a_numerical_failure() {
        let a = Matrix::from_vec(2, 2, vec![1e300, 3e300, -2e300, 5e299]).unwrap();
        assert!(matches!(Svd::compute(&a), Err(crate::Error::NumericalFailure(_))));
    }

    #[test]
    fn zero_and_rank_deficient() {
        let z = Matrix::zeros(4, 4);
        let svd = Svd::compute(&z).unwrap();
        assert!(svd.s.iter().all(|&s| s == 0.0));
        let ones = Matrix::filled(4, 4, 1.0);
        let svd = Svd::compute(&ones).unwrap();
        assert!((svd.s[0] - 4.0).abs() < 1e-12);
        assert!(svd.s[1..].iter().all(|&s| s < 1e-12));
    }
}
