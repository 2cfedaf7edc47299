use std::time::Instant;

use ndarray::{concatenate, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, adjoint, c, CMat, C64};
use crate::model::Model;
use crate::state::SpectralFactorization;

use super::cayley::{cayley_apply, dcayinv, Factored};
use super::iso2::check_dt;
use super::{fixed_point, ButcherTableau, FixedPointConfig, StepReport};

fn check_frame(model: &Model, u: &ArrayView2<C64>, s: &ArrayView2<C64>) -> Result<()> {
    if u.nrows() != model.n() {
        return Err(Error::shape(format!("{} rows", model.n()), format!("{} rows", u.nrows())));
    }
    if s.dim() != (u.ncols(), u.ncols()) {
        return Err(Error::shape(format!("{0}x{0} core", u.ncols()), format!("{:?}", s.dim())));
    }
    Ok(())
}

/// Tangent generator `L(U) = a b* − U c*` for one vector field, as the four factors.
struct Tangent {
    a: CMat,
    b: CMat,
    u: CMat,
    c: CMat,
}

/// Field of the reconstruction equation with fixed `S₀`:
/// `F = −P(U S₀ U*) U / ħ`, `L = F U* − U F* − U (U F* U)*`.
fn tangent_full(model: &Model, u: &ArrayView2<C64>, s0: &ArrayView2<C64>) -> Result<Tangent> {
    let p = model.stream_lowrank(u, s0)?;
    let f = p.mul(u).mapv(|z| -z / model.hbar());
    let a = concatenate(Axis(1), &[f.view(), u.mapv(|z| -z).view()]).expect("rows");
    let b = concatenate(Axis(1), &[u.view(), f.view()]).expect("rows");
    let cc = u.dot(&adjoint(&f.view()).dot(u));
    Ok(Tangent { a, b, u: u.to_owned(), c: cc })
}

/// Projected field of the splitting `U`-step:
/// `F = −(I − UU*) P(U S U*) U / ħ`, `L = F U* − U F*`.
fn tangent_projected(model: &Model, u: &ArrayView2<C64>, s: &ArrayView2<C64>) -> Result<Tangent> {
    let p = model.stream_lowrank(u, s)?;
    let pu = p.mul(u);
    let f = (&pu - &u.dot(&adjoint(u).dot(&pu))).mapv(|z| -z / model.hbar());
    let n = u.nrows();
    let a = concatenate(Axis(1), &[f.view(), u.mapv(|z| -z).view()]).expect("rows");
    let b = concatenate(Axis(1), &[u.view(), f.view()]).expect("rows");
    Ok(Tangent { a, b, u: CMat::zeros((n, 0)), c: CMat::zeros((n, 0)) })
}

/// Generic explicit RK-MK step with the Cayley map; every `Ωᵢ` stays factored.
fn rkmk_generic<F>(u: &ArrayView2<C64>, dt: f64, tableau: &ButcherTableau, mut field: F) -> Result<CMat>
where
    F: FnMut(&ArrayView2<C64>) -> Result<Tangent>,
{
    let tableau = ButcherTableau::new(tableau.a.clone(), tableau.b.clone())?;
    check_dt(dt)?;
    if dt == 0.0 {
        return Ok(u.to_owned());
    }
    let n = u.nrows();
    let mut ks: Vec<Factored> = Vec::with_capacity(tableau.stages());
    for i in 0..tableau.stages() {
        let terms: Vec<(f64, &Factored)> = ks.iter().enumerate().map(|(j, k)| (dt * tableau.a[i][j], k)).collect();
        let omega = Factored::combine(n, &terms);
        let ui = cayley_apply(&omega, u)?;
        let t = field(&ui.view())?;
        ks.push(dcayinv(&omega, &t.a.view(), &t.b.view(), &t.u.view(), &t.c.view()));
    }
    let terms: Vec<(f64, &Factored)> = ks.iter().zip(&tableau.b).map(|(k, &b)| (dt * b, k)).collect();
    cayley_apply(&Factored::combine(n, &terms), u)
}

/// Explicit RK-MK step on the Stiefel manifold for `U̇ = −P(U S₀ U*) U / ħ`.
pub fn rkmk_step(model: &Model, u: &ArrayView2<C64>, s0: &ArrayView2<C64>, dt: f64, tableau: &ButcherTableau) -> Result<CMat> {
    check_frame(model, u, s0)?;
    rkmk_generic(u, dt, tableau, |x| tangent_full(model, x, s0))
}

/// Implicit midpoint rule on the reconstruction equation. The induced map on
/// `U S₀ U*` is the dense isospectral scheme. The update is orthonormal only
/// at the exact fixed point, so the result is pulled back to the Stiefel
/// manifold by a polar retraction; this moves it by at most the residual.
pub fn midpoint_stiefel_step(
    model: &Model,
    u: &ArrayView2<C64>,
    s0: &ArrayView2<C64>,
    dt: f64,
    cfg: &FixedPointConfig,
) -> Result<(CMat, StepReport)> {
    check_frame(model, u, s0)?;
    check_dt(dt)?;
    cfg.validate()?;
    let start = Instant::now();
    if dt == 0.0 {
        return Ok((u.to_owned(), StepReport { wall_time: start.elapsed(), ..Default::default() }));
    }
    let h = dt / (2.0 * model.hbar());
    let u0 = u.to_owned();
    let threshold = cfg.threshold(linalg::frob_norm(u));
    let (ut, iters, residual) = fixed_point(u0.clone(), threshold, cfg, |x| {
        let p = model.stream_lowrank(x, s0)?;
        Ok(&u0 - &(p.mul(x) * c(h, 0.0)))
    })?;
    let p = model.stream_lowrank(&ut.view(), s0)?;
    let next = reorthonormalize(&(&ut - &(p.mul(&ut.view()) * c(h, 0.0))).view())?;
    Ok((
        next,
        StepReport {
            n_fixed_point_iters: iters,
            residual,
            wall_time: start.elapsed(),
        },
    ))
}

/// RK-MK step of the projected `U`-flow with `S` frozen.
pub fn splitting_u_step(model: &Model, u: &ArrayView2<C64>, s: &ArrayView2<C64>, dt: f64, tableau: &ButcherTableau) -> Result<CMat> {
    check_frame(model, u, s)?;
    rkmk_generic(u, dt, tableau, |x| tangent_projected(model, x, s))
}

/// Isospectral midpoint step on `u(r)` for `Ṡ = −[U* P(U S U*) U, S]_N` with `U` frozen.
pub fn splitting_s_step(
    model: &Model,
    s: &ArrayView2<C64>,
    u: &ArrayView2<C64>,
    dt: f64,
    cfg: &FixedPointConfig,
) -> Result<(CMat, StepReport)> {
    check_frame(model, u, s)?;
    check_dt(dt)?;
    cfg.validate()?;
    let start = Instant::now();
    if dt == 0.0 {
        return Ok((s.to_owned(), StepReport { wall_time: start.elapsed(), ..Default::default() }));
    }
    let h = c(dt / (2.0 * model.hbar()), 0.0);
    let ustar = adjoint(u);
    let reduced = |x: &ArrayView2<C64>| -> Result<CMat> {
        let p = model.stream_lowrank(u, x)?;
        Ok(ustar.dot(&p.mul(u)))
    };
    let s0 = s.to_owned();
    let threshold = cfg.threshold(linalg::frob_norm(s));
    let (st, iters, residual) = fixed_point(s0.clone(), threshold, cfg, |x| {
        let p = reduced(x)?;
        let px = p.dot(x);
        let xp = x.dot(&p);
        Ok(&s0 - &((&px - &xp) * h) + px.dot(&p) * (h * h))
    })?;
    let p = reduced(&st.view())?;
    let px = p.dot(&st);
    let xp = st.dot(&p);
    let next = &st + &((xp - &px) * h) - px.dot(&p) * (h * h);
    Ok((
        linalg::skew_part(&next.view()),
        StepReport {
            n_fixed_point_iters: iters,
            residual,
            wall_time: start.elapsed(),
        },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrangConfig {
    pub tableau: ButcherTableau,
    pub fixed_point: FixedPointConfig,
}

impl Default for StrangConfig {
    fn default() -> Self {
        Self {
            tableau: ButcherTableau::heun(),
            fixed_point: FixedPointConfig::default(),
        }
    }
}

/// Strang splitting for `Y = U S U*` with both factors evolving:
/// half `U`-step, full `S`-step, half `U`-step.
pub fn strang_step(model: &Model, f: &SpectralFactorization, dt: f64, cfg: &StrangConfig) -> Result<(SpectralFactorization, StepReport)> {
    check_dt(dt)?;
    let start = Instant::now();
    if dt == 0.0 {
        return Ok((f.clone(), StepReport { wall_time: start.elapsed(), ..Default::default() }));
    }
    let u_half = splitting_u_step(model, &f.u.view(), &f.s.view(), dt / 2.0, &cfg.tableau)?;
    let (s_new, rep) = splitting_s_step(model, &f.s.view(), &u_half.view(), dt, &cfg.fixed_point)?;
    let u_new = splitting_u_step(model, &u_half.view(), &s_new.view(), dt / 2.0, &cfg.tableau)?;
    Ok((
        SpectralFactorization::from_trusted(u_new, s_new),
        StepReport {
            wall_time: start.elapsed(),
            ..rep
        },
    ))
}

/// Löwdin re-orthonormalization `U (U*U)^{-1/2}`, the closest orthonormal
/// frame.
pub fn reorthonormalize(u: &ArrayView2<C64>) -> Result<CMat> {
    let g = adjoint(u).dot(u);
    let (lam, v) = linalg::hermitian_eig(&g.view())?;
    if lam.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Domain("frame is rank deficient".into()));
    }
    let scaled = ndarray::Array2::from_shape_fn(v.dim(), |(i, j)| v[[i, j]] / lam[j].sqrt());
    Ok(u.dot(&scaled.dot(&adjoint(&v.view()))))
}
