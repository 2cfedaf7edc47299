//! Conserved and monitored quantities: Hamiltonian, Casimirs, spectra and
//! error norms, plus the a-priori low-rank error bounds.

mod bound;
mod record;

use std::f64::consts::PI;

use ndarray::{concatenate, ArrayView2, Axis};

pub use bound::{apriori_bound, apriori_bound_truncated, AprioriBound, BoundVariant};
pub use record::{csv_header, CsvWriter, DiagnosticsRecord};

use crate::error::{Error, Result};
use crate::linalg::{self, adjoint, c, CMat, C64};
use crate::model::Model;
use crate::state::{MatrixState, SkewHermitianState, SpectralFactorization};

/// Default number of Casimirs recorded.
pub const DEFAULT_K_MAX: usize = 5;

fn real_part_checked(z: C64, scale: f64, what: &str) -> Result<f64> {
    if z.im.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Internal(format!("{what} has imaginary part {:e} (scale {scale:e})", z.im)));
    }
    Ok(z.re)
}

/// `H(W) = −½ ⟨W, P(W)⟩_N`, with the model's truncated stream map when it
/// has one (the approximate Hamiltonian).
pub fn hamiltonian(model: &Model, w: &ArrayView2<C64>) -> Result<f64> {
    let n = model.n();
    let p = model.stream(w)?;
    let scale = 4.0 * PI / n as f64;
    let val = p.inner_from(w) * (-0.5 * scale);
    real_part_checked(val, scale * linalg::frob_norm(w).powi(2), "Hamiltonian")
}

/// Hamiltonian of `U S U*` as `−½ (4π/N) tr(S* U* P U)`, never forming `Y`.
pub fn hamiltonian_factored(model: &Model, f: &SpectralFactorization) -> Result<f64> {
    let n = model.n();
    let p = model.stream_lowrank(&f.u.view(), &f.s.view())?;
    let upu = adjoint(&f.u.view()).dot(&p.mul(&f.u.view()));
    let scale = 4.0 * PI / n as f64;
    let val = linalg::frob_inner(&f.s.view(), &upu.view()) * (-0.5 * scale);
    real_part_checked(val, scale * linalg::frob_norm(&f.s.view()).powi(2), "Hamiltonian")
}

pub fn hamiltonian_of(model: &Model, state: &MatrixState) -> Result<f64> {
    match state {
        MatrixState::Dense(w) => hamiltonian(model, &w.view()),
        MatrixState::Factored(f) => hamiltonian_factored(model, f),
    }
}

/// `C_k = (4π/N) Σ_j (iμ_j)^k` for `k = 1..=k_max` from eigenvalues `iμ_j`.
///
/// `C_k` is real for even `k` and purely imaginary for odd `k`; the returned
/// vector holds the real part for even `k` and the imaginary part for odd `k`.
pub fn casimirs_from_spectrum(mu: &[f64], n: usize, k_max: usize) -> Vec<f64> {
    let scale = 4.0 * PI / n as f64;
    (1..=k_max)
        .map(|k| {
            let sum: f64 = mu.iter().map(|m| m.powi(k as i32)).sum();
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            scale * sign * sum
        })
        .collect()
}

/// Casimirs of a dense skew-Hermitian matrix, from its eigenvalues.
pub fn casimirs(w: &ArrayView2<C64>, k_max: usize) -> Result<Vec<f64>> {
    let n = linalg::require_square(w, "state")?;
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let (mu, _) = linalg::skew_eig(w)?;
    Ok(casimirs_from_spectrum(mu.as_slice().expect("contiguous"), n, k_max))
}

/// Casimirs of `U S U*` computed from `S` alone, with the `4π/N` of the full space.
pub fn casimirs_factored(f: &SpectralFactorization, k_max: usize) -> Result<Vec<f64>> {
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let (mu, _) = linalg::skew_eig(&f.s.view())?;
    Ok(casimirs_from_spectrum(mu.as_slice().expect("contiguous"), f.n(), k_max))
}

pub fn casimirs_of(state: &MatrixState, k_max: usize) -> Result<Vec<f64>> {
    match state {
        MatrixState::Dense(w) => casimirs(&w.view(), k_max),
        MatrixState::Factored(f) => casimirs_factored(f, k_max),
    }
}

/// Spectrum of `U S U*`: eigenvalues of `S` padded with zeros to length `N`,
/// sorted by modulus descending.
pub fn factored_spectrum(f: &SpectralFactorization) -> Result<Vec<C64>> {
    let (mu, _) = linalg::skew_eig(&f.s.view())?;
    let mut all = mu.to_vec();
    all.resize(f.n(), 0.0);
    Ok(linalg::modulus_order(&all).into_iter().map(|k| c(0.0, all[k])).collect())
}

pub fn spectrum_of(state: &MatrixState) -> Result<Vec<C64>> {
    match state {
        MatrixState::Dense(w) => linalg::sorted_skew_spectrum(&w.view()),
        MatrixState::Factored(f) => factored_spectrum(f),
    }
}

/// `max_j |λ_j(reference) − λ_j(current)|` with both spectra sorted by modulus.
pub fn spectrum_drift(reference: &[C64], current: &MatrixState) -> Result<f64> {
    let now = spectrum_of(current)?;
    if now.len() != reference.len() {
        return Err(Error::shape(format!("{} eigenvalues", reference.len()), format!("{}", now.len())));
    }
    Ok(reference.iter().zip(&now).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

/// `‖A − B‖_F`. Two factored states are compared inside an orthonormal
/// basis of their joint column space, so `Y` is never formed.
pub fn frobenius_error(a: &MatrixState, b: &MatrixState) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::shape(format!("N = {}", a.n()), format!("N = {}", b.n())));
    }
    match (a, b) {
        (MatrixState::Dense(x), MatrixState::Dense(y)) => Ok(linalg::frob_dist(&x.view(), &y.view())),
        (MatrixState::Factored(f), MatrixState::Factored(g)) if f.rank() + g.rank() <= f.n() => factored_distance(f, g),
        _ => {
            let (x, y) = (a.to_dense(), b.to_dense());
            Ok(linalg::frob_dist(&x.view(), &y.view()))
        }
    }
}

fn factored_distance(f: &SpectralFactorization, g: &SpectralFactorization) -> Result<f64> {
    let joint = concatenate(Axis(1), &[f.u.view(), g.u.view()]).expect("equal row counts");
    let (q, _) = linalg::qr(&joint.view())?;
    let qs = adjoint(&q.view());
    let proj = |h: &SpectralFactorization| -> CMat {
        let m = qs.dot(&h.u);
        m.dot(&h.s).dot(&adjoint(&m.view()))
    };
    let d = proj(f) - proj(g);
    Ok(linalg::frob_norm(&d.view()))
}

/// Convenience for dense states.
pub fn dense_error(a: &SkewHermitianState, b: &SkewHermitianState) -> f64 {
    linalg::frob_dist(&a.view(), &b.view())
}
