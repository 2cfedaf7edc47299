//! The Zeitlin system `Ẇ + [P(W), W]_N = 0`, `Δ_N P = W` at one `N`, with an
//! optional diagonal truncation of the stream map.

use ndarray::ArrayView2;

use crate::error::Result;
use crate::linalg::{CMat, C64};
use crate::state::hbar;
use crate::stream::{self, BandMatrix, LaplacianBlocks, StreamMatrix, TruncationOrder};

#[derive(Clone, Debug)]
pub struct Model {
    blocks: LaplacianBlocks,
    trunc: Option<TruncationOrder>,
    hbar: f64,
}

impl Model {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self {
            blocks: LaplacianBlocks::new(n)?,
            trunc: None,
            hbar: hbar(n),
        })
    }

    /// Same model with `P` replaced by the truncated stream map.
    pub fn truncated(n: usize, n_trunc: Option<usize>) -> Result<Self> {
        let mut m = Self::new(n)?;
        m.trunc = n_trunc.map(|t| TruncationOrder::new(t, n)).transpose()?;
        Ok(m)
    }

    pub fn with_truncation(&self, trunc: Option<TruncationOrder>) -> Self {
        Self {
            blocks: self.blocks.clone(),
            trunc,
            hbar: self.hbar,
        }
    }

    pub fn n(&self) -> usize {
        self.blocks.n()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn blocks(&self) -> &LaplacianBlocks {
        &self.blocks
    }

    pub fn truncation(&self) -> Option<TruncationOrder> {
        self.trunc
    }

    /// `P(W)`, or `P̃(W)` under truncation.
    pub fn stream(&self, w: &ArrayView2<C64>) -> Result<StreamMatrix> {
        StreamMatrix::solve(&self.blocks, w, self.trunc)
    }

    /// `P(U S U*)` without forming the dense product.
    pub fn stream_lowrank(&self, u: &ArrayView2<C64>, s: &ArrayView2<C64>) -> Result<BandMatrix> {
        stream::solve_stream_lowrank(&self.blocks, u, s, self.trunc)
    }

    /// Right-hand side `−[P(W), W]_N` of the Zeitlin equation.
    pub fn vector_field(&self, w: &ArrayView2<C64>) -> Result<CMat> {
        let p = self.stream(w)?;
        let pw = p.mul(w);
        let wp = p.rmul(w);
        Ok((wp - pw) / C64::new(self.hbar, 0.0))
    }
}
