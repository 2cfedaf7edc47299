//! Cayley coordinate map `Ψ(Ω) = (I − Ω/2)⁻¹(I + Ω/2)` and the inverse of its
//! right-trivialized tangent, for dense and factored `Ω = α β*`.

use ndarray::{concatenate, ArrayView2, Axis};
use ndarray_linalg::{FactorizeInto, Inverse, Solve};

use crate::error::{Error, Result};
use crate::linalg::{self, adjoint, c, CMat, C64};

/// Low-rank `Ω = α β*` with `α, β` of shape `N × k`. `k = 0` is `Ω = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Factored {
    pub alpha: CMat,
    pub beta: CMat,
}

impl Factored {
    pub fn zero(n: usize) -> Self {
        Self {
            alpha: CMat::zeros((n, 0)),
            beta: CMat::zeros((n, 0)),
        }
    }

    pub fn new(alpha: CMat, beta: CMat) -> Result<Self> {
        if alpha.dim() != beta.dim() {
            return Err(Error::shape(format!("{:?}", alpha.dim()), format!("{:?}", beta.dim())));
        }
        Ok(Self { alpha, beta })
    }

    pub fn n(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn width(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn to_dense(&self) -> CMat {
        self.alpha.dot(&adjoint(&self.beta.view()))
    }

    /// `Σ cᵢ Ωᵢ` by concatenating factors; terms with `cᵢ = 0` are skipped.
    pub fn combine(n: usize, terms: &[(f64, &Factored)]) -> Self {
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        for &(w, f) in terms {
            if w == 0.0 || f.width() == 0 {
                continue;
            }
            alphas.push(f.alpha.mapv(|z| z * w));
            betas.push(f.beta.clone());
        }
        if alphas.is_empty() {
            return Self::zero(n);
        }
        let av: Vec<_> = alphas.iter().map(|a| a.view()).collect();
        let bv: Vec<_> = betas.iter().map(|b| b.view()).collect();
        Self {
            alpha: concatenate(Axis(1), &av).expect("equal row counts"),
            beta: concatenate(Axis(1), &bv).expect("equal row counts"),
        }
    }

    /// `(I − Ω/2) X`.
    pub fn apply_a(&self, x: &ArrayView2<C64>) -> CMat {
        if self.width() == 0 {
            return x.to_owned();
        }
        let bx = adjoint(&self.beta.view()).dot(x);
        x.to_owned() - self.alpha.dot(&bx) * c(0.5, 0.0)
    }
}

/// Dense `Ψ(Ω)` by an LU solve.
pub fn cayley_dense(omega: &ArrayView2<C64>) -> Result<CMat> {
    let n = linalg::require_square(omega, "generator")?;
    let half = omega.mapv(|z| z * 0.5);
    let eye = linalg::identity(n);
    let lhs = &eye - &half;
    let rhs = &eye + &half;
    Ok(lhs.inv()?.dot(&rhs))
}

/// `Ψ(α β*) X` through the `k × k` capacitance system
/// `(I − ½αβ*)⁻¹ = I + ½ α (I_k − ½ β*α)⁻¹ β*`.
pub fn cayley_apply(omega: &Factored, x: &ArrayView2<C64>) -> Result<CMat> {
    if x.nrows() != omega.n() {
        return Err(Error::shape(format!("{} rows", omega.n()), format!("{} rows", x.nrows())));
    }
    let k = omega.width();
    if k == 0 {
        return Ok(x.to_owned());
    }
    let bstar = adjoint(&omega.beta.view());
    let half = c(0.5, 0.0);
    // Y = (I + ½αβ*) X
    let y = x.to_owned() + omega.alpha.dot(&bstar.dot(x)) * half;
    let cap = linalg::identity(k) - bstar.dot(&omega.alpha) * half;
    let rhs = bstar.dot(&y);
    let lu = cap.factorize_into()?;
    let mut z = CMat::zeros(rhs.raw_dim());
    for (j, col) in rhs.columns().into_iter().enumerate() {
        let sol = lu.solve(&col.to_owned())?;
        z.column_mut(j).assign(&sol);
    }
    Ok(y + omega.alpha.dot(&z) * half)
}

/// `dΨ⁻¹_Ω(L) = A L A*` with `A = I − Ω/2` and `L = a b* − U c*`, returned as
/// `[A a | −A U] [A b | A c]*` (width `2w + r` for `a, b` of width `w`).
pub fn dcayinv(omega: &Factored, a: &ArrayView2<C64>, b: &ArrayView2<C64>, u: &ArrayView2<C64>, cc: &ArrayView2<C64>) -> Factored {
    let aa = omega.apply_a(a);
    let ab = omega.apply_a(b);
    let au = omega.apply_a(u).mapv(|z| -z);
    let ac = omega.apply_a(cc);
    let alpha = concatenate(Axis(1), &[aa.view(), au.view()]).expect("equal row counts");
    let beta = concatenate(Axis(1), &[ab.view(), ac.view()]).expect("equal row counts");
    Factored { alpha, beta }
}

/// `dΨ⁻¹_Ω(L) = A L A*` for a dense `L`; used as a cross-check.
pub fn dcayinv_dense(omega: &ArrayView2<C64>, l: &ArrayView2<C64>) -> CMat {
    let n = omega.nrows();
    let a = linalg::identity(n) - omega.mapv(|z| z * 0.5);
    a.dot(l).dot(&adjoint(&a.view()))
}
