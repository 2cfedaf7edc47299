use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::model::Model;
use crate::state::SkewHermitianState;

use super::{fixed_point, FixedPointConfig, StepReport};

/// One step of the second-order isospectral Lie-Poisson scheme.
///
/// With `h = Δt/(2ħ)` the midpoint `W̃` solves
/// `W̃ = W − h[P(W̃), W̃] + h² P(W̃) W̃ P(W̃)` by fixed-point iteration, and the
/// update is `W⁺ = (I − hP(W̃)) W̃ (I + hP(W̃))`. The model's truncation, if
/// any, is used for every stream evaluation.
pub fn iso2_step(model: &Model, w: &SkewHermitianState, dt: f64, cfg: &FixedPointConfig) -> Result<(SkewHermitianState, StepReport)> {
    check_dt(dt)?;
    cfg.validate()?;
    let start = Instant::now();
    if w.n() != model.n() {
        return Err(Error::shape(format!("N = {}", model.n()), format!("N = {}", w.n())));
    }
    if dt == 0.0 {
        return Ok((w.clone(), StepReport { wall_time: start.elapsed(), ..Default::default() }));
    }
    let h = c(dt / (2.0 * model.hbar()), 0.0);
    let w0 = w.matrix();
    let threshold = cfg.threshold(w.frobenius_norm());
    let (wt, iters, residual) = fixed_point(w0.clone(), threshold, cfg, |x| {
        let p = model.stream(x)?;
        let pw = p.mul(x);
        let wp = p.rmul(x);
        let pwp = p.rmul(&pw.view());
        Ok(w0 - &((pw - wp) * h) + pwp * (h * h))
    })?;
    let p = model.stream(&wt.view())?;
    let pw = p.mul(&wt.view());
    let wp = p.rmul(&wt.view());
    let pwp = p.rmul(&pw.view());
    let next: CMat = &wt + &((wp - pw) * h) - pwp * (h * h);
    // The map is exactly skew-preserving; this only removes roundoff asymmetry.
    let next = linalg::skew_part(&next.view());
    Ok((
        SkewHermitianState::from_trusted(next),
        StepReport {
            n_fixed_point_iters: iters,
            residual,
            wall_time: start.elapsed(),
        },
    ))
}

/// Classical RK4 on `Ẇ = −[P(W), W]_N`; the reference integrator.
pub fn rk4_step(model: &Model, w: &SkewHermitianState, dt: f64) -> Result<SkewHermitianState> {
    check_dt(dt)?;
    let x = w.matrix();
    let half = c(dt / 2.0, 0.0);
    let k1 = model.vector_field(&x.view())?;
    let k2 = model.vector_field(&(x + &(&k1 * half)).view())?;
    let k3 = model.vector_field(&(x + &(&k2 * half)).view())?;
    let k4 = model.vector_field(&(x + &(&k3 * c(dt, 0.0))).view())?;
    let incr = (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(dt / 6.0, 0.0);
    Ok(SkewHermitianState::from_trusted(linalg::skew_part(&(x + &incr).view())))
}

pub(crate) fn check_dt(dt: f64) -> Result<()> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("time step must be finite and non-negative (got {dt})")));
    }
    Ok(())
}
