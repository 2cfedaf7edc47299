use ndarray::ArrayView2;

use crate::linalg::{CMat, C64};
use crate::quantization::basis::diag_position;

/// Square matrix stored by its diagonals `−bw..=bw`; entries outside the
/// band are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    /// `diags[bw + d][k]` is entry `diag_position(d, k)`.
    diags: Vec<Vec<C64>>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        let diags = (-(bw as i64)..=bw as i64)
            .map(|d| vec![C64::new(0.0, 0.0); n - d.unsigned_abs() as usize])
            .collect();
        Self { n, bw, diags }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn diag(&self, d: i64) -> &[C64] {
        &self.diags[(self.bw as i64 + d) as usize]
    }

    pub fn diag_mut(&mut self, d: i64) -> &mut [C64] {
        &mut self.diags[(self.bw as i64 + d) as usize]
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let d = j as i64 - i as i64;
        if d.unsigned_abs() as usize > self.bw {
            return C64::new(0.0, 0.0);
        }
        self.diag(d)[i.min(j)]
    }

    pub fn to_dense(&self) -> CMat {
        let mut out = CMat::zeros((self.n, self.n));
        for d in -(self.bw as i64)..=self.bw as i64 {
            for (k, &v) in self.diag(d).iter().enumerate() {
                out[diag_position(d, k)] = v;
            }
        }
        out
    }

    /// `tr(X* B)`, touching only the band of `X`. Summed in row-major order,
    /// so a full band reproduces the dense sum bit for bit.
    pub fn inner_from(&self, x: &ArrayView2<C64>) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..(i + self.bw + 1).min(self.n) {
                acc += x[[i, j]].conj() * self.diag(j as i64 - i as i64)[i.min(j)];
            }
        }
        acc
    }

    /// `B X` for `X` with `n` rows, in `O(n · bw · cols)`.
    pub fn mul(&self, x: &ArrayView2<C64>) -> CMat {
        assert_eq!(x.nrows(), self.n, "band product shape");
        let mut out = CMat::zeros(x.raw_dim());
        for d in -(self.bw as i64)..=self.bw as i64 {
            for (k, &v) in self.diag(d).iter().enumerate() {
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                let (i, j) = diag_position(d, k);
                out.row_mut(i).scaled_add(v, &x.row(j));
            }
        }
        out
    }

    /// `X B` for `X` with `n` columns.
    pub fn rmul(&self, x: &ArrayView2<C64>) -> CMat {
        assert_eq!(x.ncols(), self.n, "band product shape");
        let mut out = CMat::zeros(x.raw_dim());
        for (r, xrow) in x.rows().into_iter().enumerate() {
            let mut orow = out.row_mut(r);
            for d in -(self.bw as i64)..=self.bw as i64 {
                for (k, &v) in self.diag(d).iter().enumerate() {
                    let (i, j) = diag_position(d, k);
                    orow[j] += xrow[i] * v;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use ndarray::Array2;

    #[test]
    fn products_match_dense() {
        let n = 6;
        let mut b = BandMatrix::zeros(n, 2);
        for d in -2i64..=2 {
            for (k, z) in b.diag_mut(d).iter_mut().enumerate() {
                *z = c(d as f64 + 0.5, k as f64 - 1.0);
            }
        }
        let x = Array2::from_shape_fn((n, n), |(i, j)| c((i * j) as f64 * 0.1, i as f64 - j as f64));
        let dense = b.to_dense();
        let lhs = b.mul(&x.view()) - dense.dot(&x);
        let rhs = b.rmul(&x.view()) - x.dot(&dense);
        assert!(crate::linalg::max_abs(&lhs.view()) < 1e-12);
        assert!(crate::linalg::max_abs(&rhs.view()) < 1e-12);
        let inner = b.inner_from(&x.view()) - crate::linalg::frob_inner(&x.view(), &dense.view());
        assert!(inner.norm() < 1e-12);
        assert_eq!(b.get(0, 3), c(0.0, 0.0));
        assert_eq!(b.get(3, 1), dense[[3, 1]]);
    }
}
