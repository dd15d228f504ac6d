//! Hermitian eigendecomposition via the real embedding.
//!
//! nalgebra's `symmetric_eigen` mispairs eigenvalues and eigenvectors for
//! some complex Hermitian inputs (the eigenvalues themselves are fine), so
//! every routine needing eigenvectors goes through the 2n-dimensional real
//! symmetric embedding [[A, -B], [B, A]] of H = A + iB instead. Each
//! eigenvalue of H appears twice there; a real eigenvector (x, y) maps back
//! to x + iy. Within a degenerate cluster the real basis is arbitrary, so
//! two embedded columns can fold onto the same complex vector (multiplying
//! by i rotates (x, y) to (-y, x) without leaving the cluster). Reduction
//! therefore runs a pivoted Gram-Schmidt per cluster instead of naively
//! taking every second column.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::num::Float;

/// Eigenvalues (ascending) and matching orthonormal eigenvectors (columns)
/// of a Hermitian matrix. The input is trusted to be Hermitian; only its
/// lower triangle would need to be valid if the embedding read one triangle,
/// but we mirror the full matrix, so keep it consistent.
pub(crate) fn hermitian_eigen<T: Float>(
    h: &DMatrix<Complex<T>>,
) -> (Vec<T>, DMatrix<Complex<T>>) {
    let n = h.nrows();
    assert_eq!(n, h.ncols(), "square matrix required");
    let mut m = DMatrix::<T>::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let z = h[(r, c)];
            m[(r, c)] = z.re;
            m[(r + n, c + n)] = z.re;
            m[(r + n, c)] = z.im;
            m[(r, c + n)] = -z.im;
        }
    }
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });

    let scale = order
        .iter()
        .map(|&i| eig.eigenvalues[i].abs())
        .fold(T::one(), |acc, v| if v > acc { v } else { acc });
    let cluster_tol = scale * crate::num::c::<T>(1e-9);

    let fetch = |idx: usize| -> Vec<Complex<T>> {
        (0..n)
            .map(|r| Complex::new(eig.eigenvectors[(r, idx)], eig.eigenvectors[(r + n, idx)]))
            .collect()
    };

    let mut vals = Vec::with_capacity(n);
    let mut vecs: DMatrix<Complex<T>> = DMatrix::zeros(n, n);
    let mut start = 0usize;
    while vals.len() < n {
        // cluster = run of eigenvalues separated by gaps below tolerance;
        // embedding doubles everything, so a cluster always has even size
        let mut end = start + 1;
        while end < 2 * n
            && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] <= cluster_tol
        {
            end += 1;
        }
        if (end - start) % 2 == 1 && end < 2 * n {
            end += 1;
        }
        let take = (end - start) / 2;
        let mut pool: Vec<Vec<Complex<T>>> = (start..end).map(|j| fetch(order[j])).collect();
        let first = vals.len();
        for step in 0..take {
            // pivot on the candidate with the largest remainder after
            // projecting out what this cluster has already produced
            let mut best = (0usize, T::zero());
            for (c, cand) in pool.iter().enumerate() {
                let mut rem = norm_sqr(cand);
                for k in first..vals.len() {
                    let mut ovl = Complex::new(T::zero(), T::zero());
                    for r in 0..n {
                        ovl = ovl + vecs[(r, k)].conj() * cand[r];
                    }
                    rem = rem - ovl.norm_sqr();
                }
                if rem > best.1 {
                    best = (c, rem);
                }
            }
            let mut v = pool.swap_remove(best.0);
            for k in first..vals.len() {
                let mut ovl = Complex::new(T::zero(), T::zero());
                for r in 0..n {
                    ovl = ovl + vecs[(r, k)].conj() * v[r];
                }
                for r in 0..n {
                    v[r] = v[r] - vecs[(r, k)] * ovl;
                }
            }
            let inv = T::one() / norm_sqr(&v).sqrt();
            let k = vals.len();
            for r in 0..n {
                vecs[(r, k)] = v[r] * inv;
            }
            vals.push(eig.eigenvalues[order[start + 2 * step]]);
        }
        start = end;
    }
    (vals, vecs)
}

fn norm_sqr<T: Float>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex<f64>> {
        let mut h = DMatrix::<Complex<f64>>::zeros(n, n);
        for r in 0..n {
            h[(r, r)] = Complex::new(rng.gen_range(-3.0..3.0), 0.0);
            for c in 0..r {
                let z = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                h[(r, c)] = z;
                h[(c, r)] = z.conj();
            }
        }
        h
    }

    #[test]
    fn eigenpairs_align_for_random_hermitian_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = 2 + (trial % 7) * 6;
            let h = random_hermitian(&mut rng, n);
            let (vals, vecs) = hermitian_eigen(&h);
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
            for k in 0..n {
                let mut resid = 0.0f64;
                let mut norm = 0.0f64;
                for r in 0..n {
                    let mut hv = Complex::new(0.0, 0.0);
                    for s in 0..n {
                        hv += h[(r, s)] * vecs[(s, k)];
                    }
                    resid += (hv - vecs[(r, k)] * vals[k]).norm_sqr();
                    norm += vecs[(r, k)].norm_sqr();
                }
                assert!(resid.sqrt() < 1e-9, "trial {trial} col {k}: residual {resid:e}");
                assert!((norm - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn orthonormal_within_nondegenerate_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(&mut rng, 24);
        let (vals, vecs) = hermitian_eigen(&h);
        for a in 0..24 {
            for b in 0..a {
                if (vals[a] - vals[b]).abs() < 1e-9 {
                    continue;
                }
                let mut dot = Complex::new(0.0, 0.0);
                for r in 0..24 {
                    dot += vecs[(r, a)].conj() * vecs[(r, b)];
                }
                assert!(dot.norm() < 1e-9);
            }
        }
    }

    fn assert_valid_eigenbasis(h: &DMatrix<Complex<f64>>, vals: &[f64], vecs: &DMatrix<Complex<f64>>) {
        let n = h.nrows();
        for a in 0..n {
            for b in 0..n {
                let mut dot = Complex::new(0.0, 0.0);
                for r in 0..n {
                    dot += vecs[(r, a)].conj() * vecs[(r, b)];
                }
                let want = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (dot - Complex::new(want, 0.0)).norm() < 1e-9,
                    "gram ({a},{b}) = {dot}"
                );
            }
        }
        for k in 0..n {
            let mut resid = 0.0f64;
            for r in 0..n {
                let mut hv = Complex::new(0.0, 0.0);
                for s in 0..n {
                    hv += h[(r, s)] * vecs[(s, k)];
                }
                resid += (hv - vecs[(r, k)] * vals[k]).norm_sqr();
            }
            assert!(resid.sqrt() < 1e-9, "col {k}: residual {:e}", resid.sqrt());
        }
    }

    #[test]
    fn degenerate_exchange_block_stays_orthonormal() {
        // two crossed anti-diagonal couplings give doubly degenerate +-w,
        // the pattern that tripped the naive every-second-column reduction
        let w = 0.025;
        let mut h = DMatrix::<Complex<f64>>::zeros(4, 4);
        h[(0, 3)] = Complex::new(w, 0.0);
        h[(3, 0)] = Complex::new(w, 0.0);
        h[(1, 2)] = Complex::new(w, 0.0);
        h[(2, 1)] = Complex::new(w, 0.0);
        let (vals, vecs) = hermitian_eigen(&h);
        for (k, want) in [-w, -w, w, w].into_iter().enumerate() {
            assert!((vals[k] - want).abs() < 1e-12);
        }
        assert_valid_eigenbasis(&h, &vals, &vecs);
    }

    #[test]
    fn repeated_blocks_keep_complete_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let a = random_hermitian(&mut rng, 6);
        // block-diagonal copy doubles every eigenvalue
        let mut h = DMatrix::<Complex<f64>>::zeros(12, 12);
        for r in 0..6 {
            for c in 0..6 {
                h[(r, c)] = a[(r, c)];
                h[(r + 6, c + 6)] = a[(r, c)];
            }
        }
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        assert_valid_eigenbasis(&h, &vals, &vecs);
    }
}
