//! Self-check of the quantized basis and Laplacian for a list of sizes.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{self, c, CMat};
use crate::quantization::BasisSet;
use crate::stream::{apply_laplacian, solve_stream, LaplacianBlocks};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisCheck {
    #[serde(rename = "N")]
    pub n: usize,
    /// `max |⟨T_a, T_b⟩_N − δ_ab|`.
    pub gram_error: f64,
    /// Largest entry of `Δ_N T_{ℓ,m}` outside the support diagonal of `T_{ℓ,m}`.
    pub off_support: f64,
    /// `max ‖Δ_N T + ℓ(ℓ+1) T‖_F / (ℓ(ℓ+1) ‖T‖_F)` over `ℓ ≥ 1`, and `‖Δ_N T_{0,0}‖_F`.
    pub laplacian_residual: f64,
    /// `‖Δ_N (iI)‖_F` by double commutators plus `‖Δ_N⁻¹(iI)‖_F` from the deflated block solve.
    pub kernel_residual: f64,
}

impl BasisCheck {
    pub fn passes(&self) -> bool {
        self.gram_error < 1e-10 && self.off_support < 1e-15 && self.laplacian_residual < 1e-9 && self.kernel_residual == 0.0
    }
}

pub fn basis_check(n: usize) -> Result<BasisCheck> {
    let basis = BasisSet::new(n)?;
    let scale = 4.0 * std::f64::consts::PI / n as f64;
    let mats: Vec<_> = basis.iter().collect();

    // Distinct offsets have disjoint supports, so only same-m pairs can overlap.
    let mut gram_error = 0.0f64;
    for a in &mats {
        for b in mats.iter().filter(|b| b.offset() == a.offset()) {
            let dot: f64 = a.diagonal().iter().zip(b.diagonal()).map(|(x, y)| x * y).sum::<f64>() * scale;
            let target = if a.index == b.index { 1.0 } else { 0.0 };
            gram_error = gram_error.max((dot - target).abs());
        }
    }

    let mut off_support = 0.0f64;
    let mut laplacian_residual = 0.0f64;
    for t in &mats {
        let dense = t.to_dense();
        let lap = apply_laplacian(&dense.view())?;
        let ell = t.index.ell as f64;
        let ev = ell * (ell + 1.0);
        let resid: CMat = &lap + &dense.mapv(|z| z * ev);
        let denom = if t.index.ell == 0 { 1.0 } else { ev * linalg::frob_norm(&dense.view()) };
        laplacian_residual = laplacian_residual.max(linalg::frob_norm(&resid.view()) / denom);
        for ((i, j), z) in lap.indexed_iter() {
            if j as i64 - i as i64 != t.offset() {
                off_support = off_support.max(z.norm());
            }
        }
    }

    let blocks = LaplacianBlocks::new(n)?;
    let ii = linalg::identity(n).mapv(|z| z * c(0.0, 1.0));
    let kernel_residual =
        linalg::frob_norm(&apply_laplacian(&ii.view())?.view()) + linalg::frob_norm(&solve_stream(&blocks, &ii.view())?.view());

    Ok(BasisCheck {
        n,
        gram_error,
        off_support,
        laplacian_residual,
        kernel_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sizes_pass() {
        for n in [2, 3, 6] {
            let r = basis_check(n).unwrap();
            assert!(r.passes(), "{r:?}");
        }
    }
}
