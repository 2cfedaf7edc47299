//! Matrix states: dense skew-Hermitian vorticity matrices and the spectral
//! factorization `Y = U S U*` used by the low-rank schemes.

pub mod checkpoint;

use std::f64::consts::PI;

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{self, adjoint, c, CMat, C64};

/// Relative tolerance accepted by the skew-Hermitian checks.
pub const SKEW_TOL: f64 = 1e-12;

/// `ħ_N = 2 / sqrt(N² − 1)`.
pub fn hbar(n: usize) -> f64 {
    assert!(n >= 2, "hbar is undefined for N < 2");
    let nf = n as f64;
    2.0 / (nf * nf - 1.0).sqrt()
}

/// Dense `N × N` skew-Hermitian matrix (an element of `u(N)`).
#[derive(Clone, Debug, PartialEq)]
pub struct SkewHermitianState {
    w: CMat,
}

impl SkewHermitianState {
    /// Wraps `w` after checking `‖W + W*‖_F ≤ 1e-12 ‖W‖_F`.
    pub fn new(w: CMat) -> Result<Self> {
        linalg::require_square(&w.view(), "state")?;
        let norm = linalg::frob_norm(&w.view());
        let defect = linalg::skew_defect(&w.view());
        if defect > SKEW_TOL * norm.max(f64::MIN_POSITIVE) && defect > 0.0 {
            return Err(Error::invalid(format!(
                "matrix is not skew-Hermitian (‖W+W*‖ = {defect:e}, ‖W‖ = {norm:e})"
            )));
        }
        Ok(Self { w })
    }

    /// Projects an arbitrary square matrix onto its skew-Hermitian part.
    pub fn from_skew_part(a: &ArrayView2<C64>) -> Result<Self> {
        linalg::require_square(a, "state")?;
        Ok(Self {
            w: linalg::skew_part(a),
        })
    }

    /// Skips the skew-Hermitian check; callers guarantee the invariant.
    pub(crate) fn from_trusted(w: CMat) -> Self {
        Self { w }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            w: Array2::zeros((n, n)),
        }
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.w
    }

    pub fn view(&self) -> ArrayView2<'_, C64> {
        self.w.view()
    }

    pub fn into_matrix(self) -> CMat {
        self.w
    }

    pub fn frobenius_norm(&self) -> f64 {
        linalg::frob_norm(&self.w.view())
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.w.view())
    }
}

/// `Y = U S U*` with `U` an `N × r` orthonormal frame and `S` an `r × r`
/// skew-Hermitian core.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFactorization {
    pub u: CMat,
    pub s: CMat,
}

impl SpectralFactorization {
    /// Checks `U*U = I` and `S` skew-Hermitian to `1e-12`.
    pub fn new(u: CMat, s: CMat) -> Result<Self> {
        let (n, r) = u.dim();
        if r == 0 || r > n {
            return Err(Error::shape("N x r frame with 1 <= r <= N", format!("{n}x{r}")));
        }
        if s.dim() != (r, r) {
            return Err(Error::shape(format!("{r}x{r} core"), format!("{:?}", s.dim())));
        }
        let ortho = linalg::orthonormality_defect(&u.view());
        if ortho > 1e-12 * (r as f64).sqrt().max(1.0) {
            return Err(Error::invalid(format!("frame is not orthonormal (‖U*U − I‖ = {ortho:e})")));
        }
        let defect = linalg::skew_defect(&s.view());
        if defect > SKEW_TOL * linalg::frob_norm(&s.view()).max(1.0) {
            return Err(Error::invalid(format!("core is not skew-Hermitian ({defect:e})")));
        }
        Ok(Self { u, s })
    }

    pub(crate) fn from_trusted(u: CMat, s: CMat) -> Self {
        Self { u, s }
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    /// Dense `U S U*`.
    pub fn reconstruct(&self) -> SkewHermitianState {
        reconstruct(self)
    }
}

/// Either representation of a vorticity state.
#[derive(Clone, Debug, PartialEq)]
pub enum MatrixState {
    Dense(SkewHermitianState),
    Factored(SpectralFactorization),
}

impl MatrixState {
    pub fn n(&self) -> usize {
        match self {
            MatrixState::Dense(w) => w.n(),
            MatrixState::Factored(f) => f.n(),
        }
    }

    pub fn to_dense(&self) -> SkewHermitianState {
        match self {
            MatrixState::Dense(w) => w.clone(),
            MatrixState::Factored(f) => f.reconstruct(),
        }
    }
}

impl From<SkewHermitianState> for MatrixState {
    fn from(w: SkewHermitianState) -> Self {
        MatrixState::Dense(w)
    }
}

impl From<SpectralFactorization> for MatrixState {
    fn from(f: SpectralFactorization) -> Self {
        MatrixState::Factored(f)
    }
}

/// Dense reconstruction `Y = U S U*`.
pub fn reconstruct(f: &SpectralFactorization) -> SkewHermitianState {
    let us = f.u.dot(&f.s);
    let y = us.dot(&adjoint(&f.u.view()));
    SkewHermitianState::from_trusted(linalg::skew_part(&y.view()))
}

/// Scaled Frobenius inner product `⟨A, B⟩_N = (4π/N) tr(A* B)`.
pub fn scaled_inner(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Result<C64> {
    linalg::require_same_shape(a, b)?;
    let n = linalg::require_square(a, "operand")?;
    Ok(linalg::frob_inner(a, b) * (4.0 * PI / n as f64))
}

/// Scaled commutator `[A, B]_N = (AB − BA) / ħ_N`.
pub fn scaled_bracket(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Result<CMat> {
    linalg::require_same_shape(a, b)?;
    let n = linalg::require_square(a, "operand")?;
    if n < 2 {
        return Err(Error::invalid("scaled bracket needs N >= 2"));
    }
    Ok(linalg::commutator(a, b) / c(hbar(n), 0.0))
}

/// Result of a spectral truncation, with the information needed to judge it.
#[derive(Clone, Debug)]
pub struct EigTruncation {
    pub factors: SpectralFactorization,
    /// All `|Im λ_k(W)|` in the retained ordering (the singular values of `W`).
    pub singular_values: Vec<f64>,
    /// Eigenvalues `iμ_k` in the retained ordering.
    pub eigenvalues: Vec<C64>,
    /// `σ_r = σ_{r+1}` within `1e-12` relative: the best approximation is not unique.
    pub degenerate_cut: bool,
}

/// Best rank-`r` approximation of a skew-Hermitian `W` by spectral truncation.
pub fn truncated_eig(w: &SkewHermitianState, r: usize) -> Result<SpectralFactorization> {
    truncated_eig_detailed(w, r).map(|t| t.factors)
}

pub fn truncated_eig_detailed(w: &SkewHermitianState, r: usize) -> Result<EigTruncation> {
    let n = w.n();
    if r == 0 || r > n {
        return Err(Error::invalid(format!("rank r = {r} outside 1..={n}")));
    }
    let (mu, vecs) = linalg::skew_eig(&w.view())?;
    let mu = mu.to_vec();
    let order = linalg::modulus_order(&mu);

    let mut u = CMat::zeros((n, r));
    let mut s = CMat::zeros((r, r));
    for (col, &k) in order.iter().take(r).enumerate() {
        let mut v = vecs.column(k).to_owned();
        fix_phase(v.as_slice_mut().expect("owned column is contiguous"));
        u.slice_mut(s![.., col]).assign(&v);
        s[[col, col]] = c(0.0, mu[k]);
    }

    let singular_values: Vec<f64> = order.iter().map(|&k| mu[k].abs()).collect();
    let degenerate_cut = r < n && {
        let a = singular_values[r - 1];
        let b = singular_values[r];
        (a - b).abs() <= 1e-12 * a.max(f64::MIN_POSITIVE)
    };
    if degenerate_cut {
        log::warn!(
            "rank-{r} truncation cuts through a degenerate singular value ({:e}); using the deterministic tie-break",
            singular_values[r - 1]
        );
    }
    Ok(EigTruncation {
        factors: SpectralFactorization::from_trusted(u, s),
        eigenvalues: order.iter().map(|&k| c(0.0, mu[k])).collect(),
        singular_values,
        degenerate_cut,
    })
}

/// Rotates `v` so that its largest-magnitude entry (first one on ties) is
/// real and positive.
fn fix_phase(v: &mut [C64]) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        if a > best_abs * (1.0 + 1e-12) {
            best = i;
            best_abs = a;
        }
    }
    if best_abs <= 0.0 {
        return;
    }
    let phase = v[best].conj() / best_abs;
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[best] = c(v[best].norm(), 0.0);
}
