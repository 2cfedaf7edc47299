//! Quantized spherical-harmonic basis `T_{ℓ,m}` and the maps between
//! coefficient vectors and skew-Hermitian matrices.
//!
//! Rows and columns are labelled by `m₁, m₂ ∈ {s, s−1, …, −s}` with
//! `s = (N−1)/2`, so array index `i` carries label `s − i`. The selection
//! rule `m₂ = m₁ − m` puts the support of `T_{ℓ,m}` at array column offset
//! `j − i = m` (label offset `m₂ − m₁ = −m`).

use std::f64::consts::PI;

use ndarray::ArrayView2;

use super::wigner::{wigner3j, Half};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, I};
use crate::state::SkewHermitianState;

/// `(ℓ, m)` with `|m| ≤ ℓ < N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HarmonicIndex {
    pub ell: usize,
    pub m: i64,
}

impl HarmonicIndex {
    pub fn new(ell: usize, m: i64, n: usize) -> Result<Self> {
        if ell >= n || m.unsigned_abs() as usize > ell {
            return Err(Error::invalid(format!("harmonic index (ℓ={ell}, m={m}) invalid for N = {n}")));
        }
        Ok(Self { ell, m })
    }

    /// Position in the flat ordering `ℓ² + ℓ + m`.
    pub fn flat(self) -> usize {
        ((self.ell * self.ell + self.ell) as i64 + self.m) as usize
    }

    pub fn from_flat(k: usize) -> Self {
        let ell = (k as f64).sqrt() as usize;
        let ell = if (ell + 1) * (ell + 1) <= k { ell + 1 } else if ell * ell > k { ell - 1 } else { ell };
        let m = k as i64 - (ell * ell + ell) as i64;
        Self { ell, m }
    }

    /// All indices for a given `N` in flat order.
    pub fn all(n: usize) -> impl Iterator<Item = HarmonicIndex> {
        (0..n * n).map(HarmonicIndex::from_flat)
    }
}

/// One basis matrix stored by its single nonzero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisMatrix {
    pub index: HarmonicIndex,
    n: usize,
    /// `diag[k] = T[k, k + m]` for `m ≥ 0`, `T[k − m, k]` for `m < 0`.
    diag: Vec<f64>,
}

impl BasisMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Array column offset `j − i` of the support.
    pub fn offset(&self) -> i64 {
        self.index.m
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `(row, col)` of the `k`-th stored entry.
    #[inline]
    pub fn position(&self, k: usize) -> (usize, usize) {
        diag_position(self.index.m, k)
    }

    pub fn to_dense(&self) -> CMat {
        let mut t = CMat::zeros((self.n, self.n));
        for (k, &v) in self.diag.iter().enumerate() {
            t[self.position(k)] = c(v, 0.0);
        }
        t
    }
}

#[inline]
pub(crate) fn diag_position(offset: i64, k: usize) -> (usize, usize) {
    if offset >= 0 {
        (k, k + offset as usize)
    } else {
        (k + offset.unsigned_abs() as usize, k)
    }
}

/// Builds `T^N_{ℓ,m}` entry by entry on its diagonal.
pub fn basis_matrix(n: usize, idx: HarmonicIndex) -> Result<BasisMatrix> {
    if n == 0 {
        return Err(Error::invalid("N must be positive"));
    }
    let idx = HarmonicIndex::new(idx.ell, idx.m, n)?;
    let two_s = n as i64 - 1;
    let len = n - idx.m.unsigned_abs() as usize;
    let pref = (n as f64 / (4.0 * PI)).sqrt() * ((2 * idx.ell + 1) as f64).sqrt();
    let mut diag = Vec::with_capacity(len);
    for k in 0..len {
        let (i, j) = diag_position(idx.m, k);
        // doubled labels m₁ = s − i, m₂ = s − j
        let tm1 = two_s - 2 * i as i64;
        let tm2 = two_s - 2 * j as i64;
        let w = wigner3j(
            Half::doubled(two_s),
            Half::int(idx.ell as i64),
            Half::doubled(two_s),
            Half::doubled(-tm1),
            Half::int(idx.m),
            Half::doubled(tm2),
        )?;
        // (−1)^{s − m₁} = (−1)^i
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        diag.push(pref * sign * w);
    }
    Ok(BasisMatrix { index: idx, n, diag })
}

/// Every `T_{ℓ,m}` for one `N`, in flat order.
#[derive(Clone, Debug)]
pub struct BasisSet {
    n: usize,
    mats: Vec<BasisMatrix>,
}

impl BasisSet {
    pub fn new(n: usize) -> Result<Self> {
        let mats = HarmonicIndex::all(n)
            .map(|idx| basis_matrix(n, idx))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, mats })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, idx: HarmonicIndex) -> &BasisMatrix {
        &self.mats[idx.flat()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &BasisMatrix> {
        self.mats.iter()
    }

    /// `W = Σ i ω^{ℓm} T_{ℓ,m}`.
    pub fn project(&self, coeffs: &CoefficientVector) -> Result<SkewHermitianState> {
        if coeffs.n != self.n {
            return Err(Error::shape(format!("coefficients for N = {}", self.n), format!("N = {}", coeffs.n)));
        }
        let defect = coeffs.reality_defect();
        let scale = coeffs.norm().max(f64::MIN_POSITIVE);
        if defect > 1e-12 * scale && defect > 0.0 {
            return Err(Error::invalid(format!(
                "coefficients violate ω^(ℓ,−m) = (−1)^m conj(ω^(ℓ,m)) (defect {defect:e})"
            )));
        }
        let mut w = CMat::zeros((self.n, self.n));
        for t in &self.mats {
            let omega = coeffs.values[t.index.flat()];
            if omega == C64::new(0.0, 0.0) {
                continue;
            }
            let z = I * omega;
            for (k, &v) in t.diag.iter().enumerate() {
                w[t.position(k)] += z * v;
            }
        }
        // Exact skew-Hermitian symmetry; the constraint above holds to roundoff.
        Ok(SkewHermitianState::from_trusted(linalg::skew_part(&w.view())))
    }

    /// `ω^{ℓm} = ⟨i T_{ℓ,m}, W⟩_N`.
    pub fn lift(&self, w: &ArrayView2<C64>) -> Result<CoefficientVector> {
        let n = linalg::require_square(w, "matrix")?;
        if n != self.n {
            return Err(Error::shape(format!("{0}x{0}", self.n), format!("{n}x{n}")));
        }
        let scale = 4.0 * PI / n as f64;
        let values = self
            .mats
            .iter()
            .map(|t| {
                let mut acc = C64::new(0.0, 0.0);
                for (k, &v) in t.diag.iter().enumerate() {
                    acc += w[t.position(k)] * v;
                }
                // conj(i T) = −i T for real T
                -I * acc * scale
            })
            .collect();
        Ok(CoefficientVector { n, values })
    }
}

/// Coefficients `ω^{ℓm}` indexed by `ℓ² + ℓ + m`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector {
    n: usize,
    values: Vec<C64>,
}

impl CoefficientVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_values(n: usize, values: Vec<C64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::shape(format!("{} coefficients", n * n), values.len().to_string()));
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, idx: HarmonicIndex) -> C64 {
        self.values[idx.flat()]
    }

    pub fn set(&mut self, idx: HarmonicIndex, v: C64) {
        self.values[idx.flat()] = v;
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖ω^{ℓ,−m} − (−1)^m conj(ω^{ℓ,m})‖₂` over all pairs.
    pub fn reality_defect(&self) -> f64 {
        let mut acc = 0.0;
        for idx in HarmonicIndex::all(self.n).filter(|i| i.m > 0) {
            let plus = self.get(idx);
            let minus = self.get(HarmonicIndex { ell: idx.ell, m: -idx.m });
            let sign = if idx.m % 2 == 0 { 1.0 } else { -1.0 };
            acc += (minus - plus.conj() * sign).norm_sqr();
        }
        for ell in 0..self.n {
            acc += self.get(HarmonicIndex { ell, m: 0 }).im.powi(2);
        }
        acc.sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}
