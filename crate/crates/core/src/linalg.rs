//! Small dense complex linear-algebra helpers shared by every module.

use ndarray::{Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{Eigh, QR, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

/// Conjugate transpose, returned in standard (row-major) layout.
pub fn adjoint(a: &ArrayView2<C64>) -> CMat {
    let (m, n) = a.dim();
    Array2::from_shape_fn((n, m), |(i, j)| a[[j, i]].conj())
}

pub fn frob_norm(a: &ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frob_dist(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Frobenius inner product `tr(A* B)`.
pub fn frob_inner(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn commutator(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> CMat {
    a.dot(b) - b.dot(a)
}

pub fn trace(a: &ArrayView2<C64>) -> C64 {
    a.diag().sum()
}

/// `‖A + A*‖_F`, zero for an exactly skew-Hermitian matrix.
pub fn skew_defect(a: &ArrayView2<C64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[[i, j]] + a[[j, i]].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

/// `‖U* U − I‖_F`.
pub fn orthonormality_defect(u: &ArrayView2<C64>) -> f64 {
    let g = adjoint(u).dot(u);
    let r = g.nrows();
    let mut acc = 0.0;
    for i in 0..r {
        for j in 0..r {
            let target = if i == j { 1.0 } else { 0.0 };
            acc += (g[[i, j]] - target).norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn skew_part(a: &ArrayView2<C64>) -> CMat {
    let n = a.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| (a[[i, j]] - a[[j, i]].conj()) * 0.5)
}

pub fn require_square(a: &ArrayView2<C64>, what: &str) -> Result<usize> {
    let (m, n) = a.dim();
    if m != n || n == 0 {
        return Err(Error::shape(format!("non-empty square {what}"), format!("{m}x{n}")));
    }
    Ok(n)
}

pub fn require_same_shape(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!("{:?}", a.dim()), format!("{:?}", b.dim())));
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eig(h: &ArrayView2<C64>) -> Result<(Array1<f64>, CMat)> {
    // Row-major input makes the backend work on the transpose, which for a
    // complex Hermitian matrix conjugates the eigenvectors. Go column-major.
    let mut f = CMat::zeros(h.raw_dim().f());
    f.assign(h);
    let (vals, vecs) = f.eigh(UPLO::Lower)?;
    Ok((vals, vecs))
}

/// Thin QR `A = Q R` of a tall matrix, computed on a column-major copy.
pub fn qr(a: &ArrayView2<C64>) -> Result<(CMat, CMat)> {
    let mut f = CMat::zeros(a.raw_dim().f());
    f.assign(a);
    let (q, r) = f.qr()?;
    Ok((q, r))
}

/// Eigendecomposition of a skew-Hermitian `W` through the Hermitian `−iW`.
/// Returns real `μ` with `W v = iμ v`.
pub fn skew_eig(w: &ArrayView2<C64>) -> Result<(Array1<f64>, CMat)> {
    let h = w.mapv(|z| z * (-I));
    hermitian_eig(&h.view())
}

/// Orders eigenvalue moduli descending; ties by signed value descending, then
/// by original index.
pub fn modulus_order(mu: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..mu.len()).collect();
    idx.sort_by(|&a, &b| {
        mu[b]
            .abs()
            .total_cmp(&mu[a].abs())
            .then(mu[b].total_cmp(&mu[a]))
            .then(a.cmp(&b))
    });
    idx
}

/// Eigenvalues `iμ` of a skew-Hermitian matrix sorted by `|μ|` descending.
pub fn sorted_skew_spectrum(w: &ArrayView2<C64>) -> Result<Vec<C64>> {
    let (mu, _) = skew_eig(w)?;
    let mu = mu.to_vec();
    Ok(modulus_order(&mu).into_iter().map(|k| c(0.0, mu[k])).collect())
}

/// Unitary exponential `exp(X)` of a skew-Hermitian `X` through the
/// eigendecomposition of `−iX`.
pub fn expm_skew(x: &ArrayView2<C64>) -> Result<CMat> {
    let (mu, v) = skew_eig(x)?;
    let mut scaled = v.clone();
    for (mut col, &m) in scaled.axis_iter_mut(Axis(1)).zip(mu.iter()) {
        let phase = C64::from_polar(1.0, m);
        col.mapv_inplace(|z| z * phase);
    }
    Ok(scaled.dot(&adjoint(&v.view())))
}

pub fn max_abs(a: &ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
