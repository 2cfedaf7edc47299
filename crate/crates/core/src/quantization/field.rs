//! Synthesis of the vorticity function on a latitude-longitude grid.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::Serialize;

use super::basis::{BasisSet, CoefficientVector, HarmonicIndex};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::state::SkewHermitianState;

/// Real field sampled at `θ_i = π i/(n_θ − 1)` and `φ_j = 2π j/n_φ`.
#[derive(Clone, Debug, Serialize)]
pub struct FieldGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    #[serde(skip)]
    pub values: Array2<f64>,
}

impl FieldGrid {
    /// Quadrature `∫ f dμ ≈ Σ f sin θ Δθ Δφ`.
    pub fn integral(&self) -> f64 {
        let dtheta = PI / (self.n_theta - 1) as f64;
        let dphi = 2.0 * PI / self.n_phi as f64;
        let mut acc = 0.0;
        for (i, &t) in self.theta.iter().enumerate() {
            acc += t.sin() * self.values.row(i).sum();
        }
        acc * dtheta * dphi
    }

    /// Number of strict local maxima (periodic in φ, interior in θ) above
    /// `frac · max`.
    pub fn count_peaks(&self, frac: f64) -> usize {
        let vmax = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let thresh = frac * vmax;
        let mut count = 0;
        for i in 0..self.n_theta {
            for j in 0..self.n_phi {
                let v = self.values[[i, j]];
                if v <= thresh {
                    continue;
                }
                let mut is_max = true;
                'nb: for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let ii = i as i64 + di;
                        if ii < 0 || ii >= self.n_theta as i64 {
                            continue;
                        }
                        let jj = (j as i64 + dj).rem_euclid(self.n_phi as i64) as usize;
                        if self.values[[ii as usize, jj]] >= v {
                            is_max = false;
                            break 'nb;
                        }
                    }
                }
                if is_max {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Orthonormal associated Legendre values `P̄_ℓ^m(cos θ)` for `0 ≤ m ≤ ℓ < L`,
/// Condon-Shortley phase included, so that `Y_ℓm = P̄_ℓ^m e^{imφ}`.
/// Stored at `[ℓ(ℓ+1)/2 + m]`.
pub fn legendre_normalized(l_max: usize, theta: f64) -> Vec<f64> {
    let (x, y) = (theta.cos(), theta.sin());
    let tri = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut p = vec![0.0; l_max * (l_max + 1) / 2];
    if l_max == 0 {
        return p;
    }
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..l_max {
        if m > 0 {
            pmm *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * y;
        }
        p[tri(m, m)] = pmm;
        if m + 1 < l_max {
            p[tri(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * pmm;
        }
        for l in (m + 2)..l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let lp = lf - 1.0;
            let a_prev = ((4.0 * lp * lp - 1.0) / (lp * lp - mf * mf)).sqrt();
            p[tri(l, m)] = a * (x * p[tri(l - 1, m)] - p[tri(l - 2, m)] / a_prev);
        }
    }
    p
}

/// Evaluates `ω(θ,φ) = Σ ω^{ℓm} Y_{ℓm}(θ,φ)` with `ω = lift(W)`.
pub fn render_field(basis: &BasisSet, w: &SkewHermitianState, n_theta: usize, n_phi: usize) -> Result<FieldGrid> {
    if n_theta < 2 || n_phi < 2 {
        return Err(Error::invalid(format!("grid {n_theta}x{n_phi} is degenerate (need at least 2x2)")));
    }
    let coeffs = basis.lift(&w.view())?;
    render_coefficients(&coeffs, n_theta, n_phi)
}

pub fn render_coefficients(coeffs: &CoefficientVector, n_theta: usize, n_phi: usize) -> Result<FieldGrid> {
    if n_theta < 2 || n_phi < 2 {
        return Err(Error::invalid(format!("grid {n_theta}x{n_phi} is degenerate (need at least 2x2)")));
    }
    let n = coeffs.n();
    let theta: Vec<f64> = (0..n_theta).map(|i| PI * i as f64 / (n_theta - 1) as f64).collect();
    let phi: Vec<f64> = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
    let mut values = Array2::zeros((n_theta, n_phi));
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;

    for (i, &t) in theta.iter().enumerate() {
        let p = legendre_normalized(n, t);
        // g[m + (n−1)] = Σ_ℓ ω^{ℓm} P̄_ℓ^{m}, with P̄_ℓ^{−m} = (−1)^m P̄_ℓ^m
        let mut g = vec![C64::new(0.0, 0.0); 2 * n - 1];
        for ell in 0..n {
            for m in -(ell as i64)..=(ell as i64) {
                let mu = m.unsigned_abs() as usize;
                let mut pv = p[ell * (ell + 1) / 2 + mu];
                if m < 0 && mu % 2 == 1 {
                    pv = -pv;
                }
                g[(m + n as i64 - 1) as usize] += coeffs.get(HarmonicIndex { ell, m }) * pv;
            }
        }
        for (j, &f) in phi.iter().enumerate() {
            let mut z = C64::new(0.0, 0.0);
            for (k, gm) in g.iter().enumerate() {
                let m = k as f64 - (n as f64 - 1.0);
                z += gm * C64::from_polar(1.0, m * f);
            }
            values[[i, j]] = z.re;
            max_re = max_re.max(z.re.abs());
            max_im = max_im.max(z.im.abs());
        }
    }
    if max_im > 1e-9 * max_re.max(f64::MIN_POSITIVE) && max_im > 1e-300 {
        return Err(Error::Internal(format!(
            "rendered field has imaginary residual {max_im:e} against magnitude {max_re:e}"
        )));
    }
    Ok(FieldGrid {
        n_theta,
        n_phi,
        theta,
        phi,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn legendre_low_orders() {
        let t = 0.7f64;
        let p = legendre_normalized(3, t);
        let y00 = 1.0 / (4.0 * PI).sqrt();
        assert!((p[0] - y00).abs() < 1e-15);
        assert!((p[1] - (3.0 / (4.0 * PI)).sqrt() * t.cos()).abs() < 1e-15);
        // Y_11 = −√(3/8π) sin θ e^{iφ}
        assert!((p[2] + (3.0 / (8.0 * PI)).sqrt() * t.sin()).abs() < 1e-15);
        // Y_20 = √(5/16π)(3cos²θ − 1)
        assert!((p[3] - (5.0 / (16.0 * PI)).sqrt() * (3.0 * t.cos().powi(2) - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn zonal_l1_mode_renders_cosine() {
        let n = 5;
        let mut cv = CoefficientVector::zeros(n);
        cv.set(HarmonicIndex { ell: 1, m: 0 }, c(1.0, 0.0));
        let g = render_coefficients(&cv, 9, 6).unwrap();
        for (i, &t) in g.theta.iter().enumerate() {
            for j in 0..6 {
                let expect = (3.0 / (4.0 * PI)).sqrt() * t.cos();
                assert!((g.values[[i, j]] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_degenerate_grid() {
        let cv = CoefficientVector::zeros(3);
        assert!(render_coefficients(&cv, 1, 4).is_err());
    }
}
