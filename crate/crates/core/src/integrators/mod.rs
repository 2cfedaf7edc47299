//! Time integrators for the Zeitlin model and its low-rank factorizations.

pub mod cayley;
mod iso2;
mod lowrank;
pub mod tableau;

use std::time::Duration;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub use cayley::{cayley_apply, cayley_dense, dcayinv, dcayinv_dense, Factored};
pub use iso2::{iso2_step, rk4_step};
pub use lowrank::{
    midpoint_stiefel_step, reorthonormalize, rkmk_step, splitting_s_step, splitting_u_step, strang_step, StrangConfig,
};
pub use tableau::ButcherTableau;

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Stopping rule of the implicit schemes: stop once the Frobenius norm of
/// the increment falls below `tol`, scaled by the norm of the step's input
/// when `relative` is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FixedPointConfig {
    pub tol: f64,
    pub max_iters: usize,
    #[serde(default = "default_relative")]
    pub relative: bool,
}

fn default_relative() -> bool {
    true
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 100,
            relative: true,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::invalid(format!(
                "fixed-point tolerance must be positive and max_iters >= 1 (got {}, {})",
                self.tol, self.max_iters
            )));
        }
        Ok(())
    }

    pub(crate) fn threshold(&self, scale: f64) -> f64 {
        if self.relative {
            self.tol * scale.max(f64::MIN_POSITIVE)
        } else {
            self.tol
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub n_fixed_point_iters: usize,
    /// Last increment norm (absolute).
    pub residual: f64,
    pub wall_time: Duration,
}

/// Runs `x ← g(x)` from `x0` until `‖x_new − x‖_F < threshold`.
pub(crate) fn fixed_point<F>(x0: ndarray::Array2<C64>, threshold: f64, cfg: &FixedPointConfig, mut g: F) -> Result<(ndarray::Array2<C64>, usize, f64)>
where
    F: FnMut(&ArrayView2<C64>) -> Result<ndarray::Array2<C64>>,
{
    let mut x = x0;
    let mut inc = f64::INFINITY;
    for it in 1..=cfg.max_iters {
        let next = g(&x.view())?;
        inc = crate::linalg::frob_dist(&next.view(), &x.view());
        x = next;
        if !inc.is_finite() {
            break;
        }
        if inc < threshold {
            return Ok((x, it, inc));
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iters,
        residual: inc,
        tol: threshold,
    })
}
