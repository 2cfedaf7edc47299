use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Explicit Runge-Kutta coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ButcherTableau {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl ButcherTableau {
    /// Checks shape, strict lower triangularity and `Σ bᵢ = 1`.
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let s = b.len();
        if s == 0 || a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(Error::invalid(format!("tableau needs an {s}x{s} matrix a")));
        }
        for (i, row) in a.iter().enumerate() {
            if row[i..].iter().any(|&x| x != 0.0) {
                return Err(Error::invalid("tableau is not explicit (a must be strictly lower triangular)"));
            }
        }
        let sum: f64 = b.iter().sum();
        if (sum - 1.0).abs() > 1e-14 {
            return Err(Error::invalid(format!("tableau weights sum to {sum}, not 1")));
        }
        Ok(Self { a, b })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn euler() -> Self {
        Self {
            a: vec![vec![0.0]],
            b: vec![1.0],
        }
    }

    pub fn heun() -> Self {
        Self {
            a: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            b: vec![0.5, 0.5],
        }
    }

    pub fn explicit_midpoint() -> Self {
        Self {
            a: vec![vec![0.0, 0.0], vec![0.5, 0.0]],
            b: vec![0.0, 1.0],
        }
    }

    pub fn rk4() -> Self {
        Self {
            a: vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_tableaux_validate() {
        for t in [ButcherTableau::euler(), ButcherTableau::heun(), ButcherTableau::explicit_midpoint(), ButcherTableau::rk4()] {
            ButcherTableau::new(t.a.clone(), t.b.clone()).unwrap();
        }
    }

    #[test]
    fn implicit_tableau_rejected() {
        assert!(ButcherTableau::new(vec![vec![0.5]], vec![1.0]).is_err());
        assert!(ButcherTableau::new(vec![vec![0.0]], vec![0.9]).is_err());
    }
}
