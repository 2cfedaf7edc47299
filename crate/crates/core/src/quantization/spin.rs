//! Spin-`s` generators with `s = (N−1)/2`, in the basis ordered by
//! decreasing `S₃` eigenvalue.

use crate::linalg::{c, CMat};

/// Raising-operator entry `(S₊)_{k,k+1} = √((k+1)(N−1−k))`.
///
/// Equal to `√(s(s+1) − m(m+1))` with `m = s − k − 1`, written in integers
/// so no cancellation occurs.
#[inline]
pub fn ladder(n: usize, k: usize) -> f64 {
    debug_assert!(k + 1 < n);
    (((k + 1) * (n - 1 - k)) as f64).sqrt()
}

/// Returns `(S₁, S₂, S₃)` satisfying `[S₁, S₂] = i S₃` cyclically.
pub fn spin_matrices(n: usize) -> (CMat, CMat, CMat) {
    let s = (n as f64 - 1.0) / 2.0;
    let mut s1 = CMat::zeros((n, n));
    let mut s2 = CMat::zeros((n, n));
    let mut s3 = CMat::zeros((n, n));
    for k in 0..n {
        s3[[k, k]] = c(s - k as f64, 0.0);
    }
    for k in 0..n.saturating_sub(1) {
        let a = ladder(n, k);
        // S₁ = (S₊ + S₋)/2, S₂ = (S₊ − S₋)/(2i)
        s1[[k, k + 1]] = c(a / 2.0, 0.0);
        s1[[k + 1, k]] = c(a / 2.0, 0.0);
        s2[[k, k + 1]] = c(0.0, -a / 2.0);
        s2[[k + 1, k]] = c(0.0, a / 2.0);
    }
    (s1, s2, s3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, frob_norm, identity, I};

    #[test]
    fn spin_half_is_half_pauli() {
        let (s1, s2, s3) = spin_matrices(2);
        assert_eq!(s1[[0, 1]], c(0.5, 0.0));
        assert_eq!(s2[[0, 1]], c(0.0, -0.5));
        assert_eq!(s2[[1, 0]], c(0.0, 0.5));
        assert_eq!(s3[[0, 0]], c(0.5, 0.0));
        assert_eq!(s3[[1, 1]], c(-0.5, 0.0));
    }

    #[test]
    fn su2_relations() {
        for n in [1usize, 2, 3, 10, 33, 64] {
            let (s1, s2, s3) = spin_matrices(n);
            let scale = (n * n) as f64;
            for (a, b, cc) in [(&s1, &s2, &s3), (&s2, &s3, &s1), (&s3, &s1, &s2)] {
                let r = commutator(&a.view(), &b.view()) - cc.mapv(|z| z * I);
                assert!(frob_norm(&r.view()) < 1e-13 * scale, "N={n}");
            }
            let s = (n as f64 - 1.0) / 2.0;
            let cas = s1.dot(&s1) + s2.dot(&s2) + s3.dot(&s3) - identity(n).mapv(|z| z * s * (s + 1.0));
            assert!(frob_norm(&cas.view()) < 1e-12 * scale, "N={n}");
        }
    }
}
