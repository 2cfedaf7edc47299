//! Quantized Laplacian and the stream-matrix solve `Δ_N P = W`.
//!
//! `Δ_N` maps every diagonal of a matrix into itself, so it splits into one
//! symmetric tridiagonal block per diagonal offset. Offsets `±m` share the
//! same block. All blocks with `m ≥ 1` are negative definite and are solved
//! with a precomputed `LDLᵀ` (Thomas) sweep. The `m = 0` block annihilates the
//! constant vector; it has zero row sums, so it is solved in flux form on the
//! mean-free complement.

mod band;

pub use band::BandMatrix;

use std::mem::MaybeUninit;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::quantization::basis::diag_position;
use crate::quantization::spin::{ladder, spin_matrices};

/// Diagonal truncation order `Ñ` with `0 < Ñ ≤ N − 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruncationOrder(usize);

impl TruncationOrder {
    pub fn new(n_trunc: usize, n: usize) -> Result<Self> {
        if n_trunc == 0 || n_trunc + 1 > n {
            return Err(Error::invalid(format!("truncation order {n_trunc} outside 1..={}", n.saturating_sub(1))));
        }
        Ok(Self(n_trunc))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// One tridiagonal block with its `LDLᵀ` factors.
#[derive(Clone, Debug)]
struct Block {
    diag: Vec<f64>,
    off: Vec<f64>,
    /// Multipliers `l_k = off_{k−1}/d_{k−1}` (index 0 unused).
    l: Vec<f64>,
    /// `1/d_k`.
    inv_d: Vec<f64>,
}

/// Tridiagonal blocks `Δ^m`, `m = 0 … N−1`, of size `N − m`.
#[derive(Clone, Debug)]
pub struct LaplacianBlocks {
    n: usize,
    blocks: Vec<Block>,
}

impl LaplacianBlocks {
    /// Restricts `−Σ_a [S_a, [S_a, ·]] = −2s(s+1)·X + 2 S₃XS₃ + S₊XS₋ + S₋XS₊` to
    /// the diagonal at offset `m`, reading `S₃` and the ladder entries of the
    /// spin matrices.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("the Laplacian needs N >= 2"));
        }
        let s = (n as f64 - 1.0) / 2.0;
        let casimir = 2.0 * s * (s + 1.0);
        let label = |k: usize| s - k as f64;
        let mut blocks = Vec::with_capacity(n);
        for m in 0..n {
            let len = n - m;
            let diag: Vec<f64> = (0..len).map(|k| -casimir + 2.0 * label(k) * label(k + m)).collect();
            let off: Vec<f64> = (0..len.saturating_sub(1)).map(|k| ladder(n, k) * ladder(n, k + m)).collect();
            let mut l = vec![0.0; len];
            let mut inv_d = vec![0.0; len];
            if m > 0 {
                let mut d_prev = diag[0];
                inv_d[0] = 1.0 / d_prev;
                for k in 1..len {
                    l[k] = off[k - 1] / d_prev;
                    let d = diag[k] - l[k] * off[k - 1];
                    if !(d < 0.0) || !d.is_finite() {
                        return Err(Error::Internal(format!("Laplacian block {m} lost definiteness at row {k} (pivot {d:e})")));
                    }
                    inv_d[k] = 1.0 / d;
                    d_prev = d;
                }
            } else {
                // Zero row sums make the flux solve exact.
                for k in 0..len {
                    let lo = if k > 0 { off[k - 1] } else { 0.0 };
                    let hi = if k + 1 < len { off[k] } else { 0.0 };
                    let sum = diag[k] + lo + hi;
                    if sum.abs() > 1e-12 * diag[k].abs().max(1.0) {
                        return Err(Error::Internal(format!("zonal block row {k} has nonzero sum {sum:e}")));
                    }
                }
            }
            blocks.push(Block { diag, off, l, inv_d });
        }
        Ok(Self { n, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.diag.len()).collect()
    }

    /// Main and off diagonals of `Δ^m` (`m` may be negative).
    pub fn block(&self, m: i64) -> (&[f64], &[f64]) {
        let b = &self.blocks[m.unsigned_abs() as usize];
        (&b.diag, &b.off)
    }

    /// Dense copy of `Δ^m` for inspection.
    pub fn block_dense(&self, m: i64) -> ndarray::Array2<f64> {
        let (d, o) = self.block(m);
        let len = d.len();
        let mut a = ndarray::Array2::zeros((len, len));
        for k in 0..len {
            a[[k, k]] = d[k];
            if k + 1 < len {
                a[[k, k + 1]] = o[k];
                a[[k + 1, k]] = o[k];
            }
        }
        a
    }

    fn check(&self, w: &ArrayView2<C64>) -> Result<()> {
        let n = linalg::require_square(w, "matrix")?;
        if n != self.n {
            return Err(Error::shape(format!("{0}x{0}", self.n), format!("{n}x{n}")));
        }
        Ok(())
    }

    /// `Δ^m v` in place of a scratch copy.
    fn apply_block(&self, m: i64, v: &[C64], out: &mut [C64]) {
        let (d, o) = self.block(m);
        let len = d.len();
        for k in 0..len {
            let mut acc = v[k] * d[k];
            if k > 0 {
                acc += v[k - 1] * o[k - 1];
            }
            if k + 1 < len {
                acc += v[k + 1] * o[k];
            }
            out[k] = acc;
        }
    }

    /// Solves `Δ^m x = b` in place. For `m = 0` the right-hand side is first
    /// made mean-free and the returned solution is mean-free.
    fn solve_block(&self, m: i64, b: &mut [C64]) {
        let blk = &self.blocks[m.unsigned_abs() as usize];
        let len = b.len();
        if m == 0 {
            let mean = b.iter().sum::<C64>() / len as f64;
            // flux f_k = Σ_{j≤k} b_j, then x_{k+1} = x_k + f_k / off_k
            let mut flux = C64::new(0.0, 0.0);
            let mut x = C64::new(0.0, 0.0);
            for k in 0..len {
                flux += b[k] - mean;
                b[k] = x;
                if k + 1 < len {
                    x += flux / blk.off[k];
                }
            }
            let mean_x = b.iter().sum::<C64>() / len as f64;
            for z in b.iter_mut() {
                *z -= mean_x;
            }
            return;
        }
        for k in 1..len {
            let prev = b[k - 1];
            b[k] -= prev * blk.l[k];
        }
        b[len - 1] *= blk.inv_d[len - 1];
        for k in (0..len - 1).rev() {
            let next = b[k + 1];
            b[k] = (b[k] - next * blk.off[k]) * blk.inv_d[k];
        }
    }
}

/// `Δ_N W = −Σ_a [S_a, [S_a, W]]` by dense double commutators.
pub fn apply_laplacian(w: &ArrayView2<C64>) -> Result<CMat> {
    let n = linalg::require_square(w, "matrix")?;
    let (s1, s2, s3) = spin_matrices(n);
    let mut out = CMat::zeros((n, n));
    for s in [&s1, &s2, &s3] {
        let inner = linalg::commutator(&s.view(), w);
        out = out - linalg::commutator(&s.view(), &inner.view());
    }
    Ok(out)
}

/// `Δ_N W` through the tridiagonal blocks, `O(N²)`.
pub fn apply_laplacian_blocks(blocks: &LaplacianBlocks, w: &ArrayView2<C64>) -> Result<CMat> {
    blocks.check(w)?;
    let n = blocks.n;
    let mut out = CMat::zeros((n, n));
    let mut r = vec![C64::new(0.0, 0.0); n];
    for_each_diagonal(
        w,
        n as i64 - 1,
        |d, v| {
            let len = v.len();
            blocks.apply_block(d, v, &mut r[..len]);
            v.copy_from_slice(&r[..len]);
        },
        |ds, bufs| scatter_group(&mut out, ds, bufs, |z| z),
    );
    Ok(out)
}

/// Zeroes every diagonal with `|j − i| > Ñ`.
pub fn truncate_diagonals(w: &ArrayView2<C64>, trunc: TruncationOrder) -> CMat {
    let bw = trunc.get();
    let mut out = w.to_owned();
    for ((i, j), z) in out.indexed_iter_mut() {
        if i.abs_diff(j) > bw {
            *z = C64::new(0.0, 0.0);
        }
    }
    out
}

/// Diagonals are moved in groups of this many adjacent offsets so that each
/// row is read once per group instead of once per diagonal.
const GROUP: i64 = 64;

/// Rows ahead whose slice of the tile is prefetched. Consecutive rows of a
/// tile sit on different pages, which defeats the hardware prefetcher.
const AHEAD: i64 = 8;

/// Hints that the entries `base[first..first + len]` (in units of `stride`)
/// will be touched soon. Pure hint, never dereferences.
#[inline(always)]
fn prefetch_run<T>(base: *const T, first: isize, len: i64, stride: isize) {
    #[cfg(target_arch = "x86_64")]
    {
        use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
        let step = (64 / std::mem::size_of::<T>().max(1)) as i64;
        let mut k = 0;
        while k < len {
            let p = base.wrapping_offset(first + k as isize * stride);
            // SAFETY: prefetch has no architectural effect and tolerates any address.
            unsafe { _mm_prefetch(p as *const i8, _MM_HINT_T0) };
            k += step;
        }
    }
    #[cfg(not(target_arch = "x86_64"))]
    let _ = (base, first, len, stride);
}

/// Row `i` of the tile `ds` as `(first column, count)`, empty rows clipped.
fn tile_row(n: i64, i: i64, ds: &std::ops::Range<i64>) -> (i64, i64) {
    let lo = ds.start.max(-i);
    let hi = ds.end.min(n - i);
    (i + lo, (hi - lo).max(0))
}

fn prefetch_tile_row<T>(a: *const T, strides: &[isize], n: i64, i: i64, ds: &std::ops::Range<i64>) {
    if i < n {
        let (j, len) = tile_row(n, i, ds);
        prefetch_run(a, i as isize * strides[0] + j as isize * strides[1], len, strides[1]);
    }
}

/// Copies diagonals `ds` of `w` into `bufs` with one sweep over the rows.
fn gather_group(w: &ArrayView2<C64>, ds: std::ops::Range<i64>, bufs: &mut [Vec<C64>]) {
    let n = w.nrows() as i64;
    for b in bufs.iter_mut() {
        b.clear();
    }
    for i in 0..n {
        prefetch_tile_row(w.as_ptr(), w.strides(), n, i + AHEAD, &ds);
        let lo = ds.start.max(-i);
        let hi = ds.end.min(n - i);
        for d in lo..hi {
            bufs[(d - ds.start) as usize].push(w[[i as usize, (i + d) as usize]]);
        }
    }
}

/// Inverse of [`gather_group`].
fn scatter_group<T>(out: &mut ndarray::Array2<T>, ds: std::ops::Range<i64>, bufs: &[Vec<C64>], wrap: impl Fn(C64) -> T) {
    let n = out.nrows() as i64;
    for i in 0..n {
        prefetch_tile_row(out.as_ptr(), out.strides(), n, i + AHEAD, &ds);
        let lo = ds.start.max(-i);
        let hi = ds.end.min(n - i);
        for d in lo..hi {
            let j = i + d;
            out[[i as usize, j as usize]] = wrap(bufs[(d - ds.start) as usize][i.min(j) as usize]);
        }
    }
}

/// Runs `f(d, diagonal)` over offsets `-bw..=bw`, in place, tile by tile.
fn for_each_diagonal(w: &ArrayView2<C64>, bw: i64, mut f: impl FnMut(i64, &mut Vec<C64>), mut sink: impl FnMut(std::ops::Range<i64>, &[Vec<C64>])) {
    let mut bufs: Vec<Vec<C64>> = (0..GROUP).map(|_| Vec::with_capacity(w.nrows())).collect();
    let mut start = -bw;
    while start <= bw {
        let end = (start + GROUP).min(bw + 1);
        let ds = start..end;
        let used = &mut bufs[..(end - start) as usize];
        gather_group(w, ds.clone(), used);
        for (t, b) in used.iter_mut().enumerate() {
            f(start + t as i64, b);
        }
        sink(ds, used);
        start = end;
    }
}

/// `P` with `tr P = 0` and `Δ_N P = W − (tr W / N) I`, `O(N²)`.
pub fn solve_stream(blocks: &LaplacianBlocks, w: &ArrayView2<C64>) -> Result<CMat> {
    blocks.check(w)?;
    let n = blocks.n;
    // Every entry lies on exactly one diagonal, so the scatter initializes all
    // of them and the output needs no zero fill.
    let mut p = ndarray::Array2::<C64>::uninit((n, n));
    for_each_diagonal(w, n as i64 - 1, |d, v| blocks.solve_block(d, v), |ds, bufs| scatter_group(&mut p, ds, bufs, MaybeUninit::new));
    // SAFETY: offsets -(n-1)..=n-1 cover every (i, j) once.
    Ok(unsafe { p.assume_init() })
}

/// Stream matrix of `T_Ñ(W)`: only diagonals `|d| ≤ Ñ` are solved, and only
/// they are read from `W`. `O(N Ñ)`.
pub fn solve_stream_truncated(blocks: &LaplacianBlocks, w: &ArrayView2<C64>, trunc: TruncationOrder) -> Result<BandMatrix> {
    blocks.check(w)?;
    let bw = trunc.get();
    let mut p = BandMatrix::zeros(blocks.n, bw);
    for_each_diagonal(
        w,
        bw as i64,
        |d, v| blocks.solve_block(d, v),
        |ds, bufs| {
            for (d, v) in ds.zip(bufs) {
                p.diag_mut(d).copy_from_slice(v);
            }
        },
    );
    Ok(p)
}

/// Stream matrix of `Y = U S U*` (optionally truncated) assembled from the
/// needed diagonals of `Y` only; each diagonal costs `O(r (N − |d|))`.
pub fn solve_stream_lowrank(
    blocks: &LaplacianBlocks,
    u: &ArrayView2<C64>,
    s: &ArrayView2<C64>,
    trunc: Option<TruncationOrder>,
) -> Result<BandMatrix> {
    let (n, r) = u.dim();
    if n != blocks.n || s.dim() != (r, r) {
        return Err(Error::shape(
            format!("{}xr frame with rxr core", blocks.n),
            format!("{n}x{r} frame, {:?} core", s.dim()),
        ));
    }
    let bw = trunc.map_or(n - 1, |t| t.get());
    let us = u.dot(s);
    let ubar = u.mapv(|z| z.conj());
    let mut p = BandMatrix::zeros(n, bw);
    let mut v = Vec::with_capacity(n);
    for d in -(bw as i64)..=bw as i64 {
        let len = n - d.unsigned_abs() as usize;
        v.clear();
        v.extend((0..len).map(|k| {
            let (i, j) = diag_position(d, k);
            let a = us.row(i);
            let b = ubar.row(j);
            a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<C64>()
        }));
        blocks.solve_block(d, &mut v);
        p.diag_mut(d).copy_from_slice(&v);
    }
    Ok(p)
}

/// A stream matrix in whichever storage the solver produced.
#[derive(Clone, Debug)]
pub enum StreamMatrix {
    Dense(CMat),
    Banded(BandMatrix),
}

impl StreamMatrix {
    /// Dense or truncated solve depending on `trunc`.
    pub fn solve(blocks: &LaplacianBlocks, w: &ArrayView2<C64>, trunc: Option<TruncationOrder>) -> Result<Self> {
        Ok(match trunc {
            None => StreamMatrix::Dense(solve_stream(blocks, w)?),
            Some(t) => StreamMatrix::Banded(solve_stream_truncated(blocks, w, t)?),
        })
    }

    /// `P X`.
    pub fn mul(&self, x: &ArrayView2<C64>) -> CMat {
        match self {
            StreamMatrix::Dense(p) => p.dot(x),
            StreamMatrix::Banded(b) => b.mul(x),
        }
    }

    /// `X P`.
    pub fn rmul(&self, x: &ArrayView2<C64>) -> CMat {
        match self {
            StreamMatrix::Dense(p) => x.dot(p),
            StreamMatrix::Banded(b) => b.rmul(x),
        }
    }

    /// `tr(X* P)`.
    pub fn inner_from(&self, x: &ArrayView2<C64>) -> C64 {
        match self {
            StreamMatrix::Dense(p) => crate::linalg::frob_inner(x, &p.view()),
            StreamMatrix::Banded(b) => b.inner_from(x),
        }
    }

    pub fn to_dense(&self) -> CMat {
        match self {
            StreamMatrix::Dense(p) => p.clone(),
            StreamMatrix::Banded(b) => b.to_dense(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, frob_dist, frob_norm, identity, I};
    use crate::quantization::{BasisSet, HarmonicIndex};

    fn sample(n: usize, seed: u64) -> CMat {
        // cheap deterministic skew-Hermitian filler
        let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut next = || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a = CMat::from_shape_fn((n, n), |_| c(next(), next()));
        linalg::skew_part(&a.view())
    }

    #[test]
    fn blocks_match_dense_probes() {
        let n = 7;
        let blocks = LaplacianBlocks::new(n).unwrap();
        for d in -(n as i64 - 1)..=(n as i64 - 1) {
            let len = n - d.unsigned_abs() as usize;
            let dense = blocks.block_dense(d);
            for k in 0..len {
                let mut e = CMat::zeros((n, n));
                e[diag_position(d, k)] = c(1.0, 0.0);
                let le = apply_laplacian(&e.view()).unwrap();
                for kk in 0..len {
                    let got = le[diag_position(d, kk)];
                    assert!((got - c(dense[[kk, k]], 0.0)).norm() < 1e-12, "d={d} k={k} kk={kk}");
                }
                // nothing leaks off the diagonal
                let mut off = le.clone();
                for kk in 0..len {
                    off[diag_position(d, kk)] = c(0.0, 0.0);
                }
                assert!(frob_norm(&off.view()) < 1e-12);
            }
        }
    }

    #[test]
    fn two_by_two_offdiagonal_block() {
        let blocks = LaplacianBlocks::new(2).unwrap();
        assert_eq!(blocks.block_sizes(), vec![2, 1]);
        let (d, _) = blocks.block(1);
        assert!((d[0] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_identity_and_inverse() {
        let n = 9;
        let basis = BasisSet::new(n).unwrap();
        let blocks = LaplacianBlocks::new(n).unwrap();
        for idx in HarmonicIndex::all(n) {
            let t = basis.get(idx).to_dense();
            let lam = -((idx.ell * (idx.ell + 1)) as f64);
            let lt = apply_laplacian_blocks(&blocks, &t.view()).unwrap();
            assert!(frob_dist(&lt.view(), &t.mapv(|z| z * lam).view()) < 1e-11 * lam.abs().max(1.0));
            if idx.ell > 0 {
                let p = solve_stream(&blocks, &t.view()).unwrap();
                assert!(frob_dist(&p.view(), &t.mapv(|z| z / lam).view()) < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_and_trace_deflation() {
        let n = 6;
        let blocks = LaplacianBlocks::new(n).unwrap();
        let iw = identity(n).mapv(|z| z * I);
        assert!(frob_norm(&apply_laplacian(&iw.view()).unwrap().view()) == 0.0);
        let p = solve_stream(&blocks, &iw.view()).unwrap();
        assert!(frob_norm(&p.view()) < 1e-14);

        let w = sample(n, 3) + identity(n).mapv(|z| z * c(0.0, 0.7));
        let p = solve_stream(&blocks, &w.view()).unwrap();
        assert!(linalg::trace(&p.view()).norm() < 1e-13);
        let lp = apply_laplacian_blocks(&blocks, &p.view()).unwrap();
        let tr = linalg::trace(&w.view()) / n as f64;
        let target = &w - &identity(n).mapv(|z| z * tr);
        assert!(frob_dist(&lp.view(), &target.view()) < 1e-12 * frob_norm(&w.view()));
    }

    #[test]
    fn truncation_paths_agree() {
        let n = 10;
        let blocks = LaplacianBlocks::new(n).unwrap();
        let w = sample(n, 11);
        let full = solve_stream(&blocks, &w.view()).unwrap();
        let t_all = TruncationOrder::new(n - 1, n).unwrap();
        let band = solve_stream_truncated(&blocks, &w.view(), t_all).unwrap();
        assert_eq!(band.to_dense(), full);

        let t3 = TruncationOrder::new(3, n).unwrap();
        let band = solve_stream_truncated(&blocks, &w.view(), t3).unwrap();
        let via_dense = truncate_diagonals(&solve_stream(&blocks, &truncate_diagonals(&w.view(), t3).view()).unwrap().view(), t3);
        assert!(frob_dist(&band.to_dense().view(), &via_dense.view()) < 1e-14);
    }

    #[test]
    fn truncation_order_range() {
        assert!(TruncationOrder::new(0, 5).is_err());
        assert!(TruncationOrder::new(5, 5).is_err());
        assert!(TruncationOrder::new(4, 5).is_ok());
    }
}
