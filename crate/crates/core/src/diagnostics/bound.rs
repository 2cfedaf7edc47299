use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::state::{hbar, SkewHermitianState};
use crate::stream::{truncate_diagonals, TruncationOrder};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundVariant {
    ExactStream,
    TruncatedStream,
}

/// Right-hand side of the a-priori estimate for `‖Y(t) − svd_r(W(t))‖_F`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriBound {
    /// Lipschitz constant `2 ħ⁻¹ √N ρ(W₀)`.
    pub k: f64,
    /// `sqrt(Σ_{i>r} σ_i²)`.
    pub tail_norm: f64,
    pub bound_value: f64,
    pub variant: BoundVariant,
}

struct Spectral {
    k: f64,
    tail: f64,
    head: f64,
    hbar: f64,
}

fn spectral(w0: &SkewHermitianState, r: usize, t: f64) -> Result<Spectral> {
    let n = w0.n();
    if r == 0 || r > n {
        return Err(Error::invalid(format!("rank r = {r} outside 1..={n}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be finite and non-negative (got {t})")));
    }
    let sigma: Vec<f64> = linalg::sorted_skew_spectrum(&w0.view())?.iter().map(|z| z.im.abs()).collect();
    let rho = sigma.first().copied().unwrap_or(0.0);
    let h = hbar(n);
    Ok(Spectral {
        k: 2.0 / h * (n as f64).sqrt() * rho,
        tail: sigma[r..].iter().map(|s| s * s).sum::<f64>().sqrt(),
        head: sigma[..r].iter().map(|s| s * s).sum::<f64>().sqrt(),
        hbar: h,
    })
}

/// `(e^{Kt} − 1)/K`, continuous at `K = 0`.
fn growth(k: f64, t: f64) -> f64 {
    if k * t < 1e-8 {
        t * (1.0 + 0.5 * k * t)
    } else {
        (k * t).exp_m1() / k
    }
}

/// `‖svd_r(W₀)‖_F / (ħ K) · (e^{Kt} − 1) · sqrt(Σ_{i>r} σ_i²)`.
pub fn apriori_bound(w0: &SkewHermitianState, r: usize, t: f64) -> Result<AprioriBound> {
    let sp = spectral(w0, r, t)?;
    let bound_value = sp.head / sp.hbar * growth(sp.k, t) * sp.tail;
    Ok(AprioriBound {
        k: sp.k,
        tail_norm: sp.tail,
        bound_value,
        variant: BoundVariant::ExactStream,
    })
}

/// Bound for the truncated-stream dynamics:
/// `(1 + ‖W₀‖_F/(ħK))(e^{Kt} − 1) tail + ‖W₀‖_F ∫₀ᵗ ½‖W(s) − T(W(s))‖_F e^{K(t−s)} ds`.
///
/// The integral runs over `trajectory` (time, state) pairs spanning `[0, t]`
/// with the trapezoidal rule. The Lipschitz constant of the untruncated
/// field is reused, since truncation does not increase the operator norm.
pub fn apriori_bound_truncated(
    w0: &SkewHermitianState,
    r: usize,
    t: f64,
    trunc: TruncationOrder,
    trajectory: &[(f64, SkewHermitianState)],
) -> Result<AprioriBound> {
    let sp = spectral(w0, r, t)?;
    let norm_w0 = w0.frobenius_norm();
    let lead = if sp.k > 0.0 {
        (1.0 + norm_w0 / (sp.hbar * sp.k)) * (sp.k * t).exp_m1() * sp.tail
    } else {
        0.0
    };
    let integral = if t == 0.0 {
        0.0
    } else {
        if trajectory.len() < 2 {
            return Err(Error::invalid("the truncated bound needs at least two trajectory samples"));
        }
        let t0 = trajectory[0].0;
        let t1 = trajectory[trajectory.len() - 1].0;
        if t0.abs() > 1e-12 * t.max(1.0) || (t1 - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::invalid(format!("trajectory spans [{t0}, {t1}], expected [0, {t}]")));
        }
        let g: Vec<(f64, f64)> = trajectory
            .iter()
            .map(|(s, w)| {
                let tw = truncate_diagonals(&w.view(), trunc);
                let gap = 0.5 * linalg::frob_dist(&w.view(), &tw.view());
                (*s, gap * (sp.k * (t - s)).exp())
            })
            .collect();
        g.windows(2).map(|p| 0.5 * (p[1].0 - p[0].0) * (p[0].1 + p[1].1)).sum::<f64>()
    };
    Ok(AprioriBound {
        k: sp.k,
        tail_norm: sp.tail,
        bound_value: lead + norm_w0 * integral,
        variant: BoundVariant::TruncatedStream,
    })
}
