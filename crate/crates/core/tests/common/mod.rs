//! Oracles shared by the integration suites. They deliberately avoid the
//! library's own numerical paths.
#![allow(dead_code)]

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

use zeitlin_core::linalg::{c, CMat, C64};
use zeitlin_core::state::SkewHermitianState;

fn fact(n: i64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Wigner 3j symbol from the Racah sum in exact rational arithmetic; all
/// arguments are doubled so half-integers are exact.
pub fn wigner3j_exact(tj1: i64, tj2: i64, tj3: i64, tm1: i64, tm2: i64, tm3: i64) -> f64 {
    if tm1 + tm2 + tm3 != 0 || tm1.abs() > tj1 || tm2.abs() > tj2 || tm3.abs() > tj3 {
        return 0.0;
    }
    if tj3 < (tj1 - tj2).abs() || tj3 > tj1 + tj2 || (tj1 + tj2 + tj3) % 2 != 0 {
        return 0.0;
    }
    if (tj1 + tm1) % 2 != 0 || (tj2 + tm2) % 2 != 0 || (tj3 + tm3) % 2 != 0 {
        return 0.0;
    }
    let h = |x: i64| x / 2;
    let (a, b, cc) = (h(tj1 + tj2 - tj3), h(tj1 - tj2 + tj3), h(-tj1 + tj2 + tj3));
    let tri = BigRational::new(fact(a) * fact(b) * fact(cc), fact(h(tj1 + tj2 + tj3) + 1));
    let under = tri
        * BigRational::from_integer(
            fact(h(tj1 + tm1)) * fact(h(tj1 - tm1)) * fact(h(tj2 + tm2)) * fact(h(tj2 - tm2)) * fact(h(tj3 + tm3)) * fact(h(tj3 - tm3)),
        );
    let mut sum = BigRational::zero();
    for k in 0..=(tj1 + tj2 + tj3) {
        let d = [
            k,
            h(tj3 - tj2 + tm1) + k,
            h(tj3 - tj1 - tm2) + k,
            h(tj1 + tj2 - tj3) - k,
            h(tj1 - tm1) - k,
            h(tj2 + tm2) - k,
        ];
        if d.iter().any(|&x| x < 0) {
            continue;
        }
        let den = d.iter().fold(BigInt::one(), |acc, &x| acc * fact(x));
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let phase = h(tj1 - tj2 - tm3);
    let sign = if phase.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let s_sign = if sum.is_negative() { -1.0 } else { 1.0 };
    let mag2 = under * &sum * &sum;
    sign * s_sign * mag2.to_f64().expect("finite").sqrt()
}

/// Dense `T^N_{ℓ,m}` from the exact 3j oracle, with labels `m₁ = s − i`.
pub fn basis_exact(n: usize, ell: usize, m: i64) -> CMat {
    let two_s = n as i64 - 1;
    let pref = (n as f64 / (4.0 * std::f64::consts::PI)).sqrt() * ((2 * ell + 1) as f64).sqrt();
    let mut t = CMat::zeros((n, n));
    for i in 0..n {
        let j = i as i64 + m;
        if j < 0 || j >= n as i64 {
            continue;
        }
        let tm1 = two_s - 2 * i as i64;
        let tm2 = two_s - 2 * j;
        let w = wigner3j_exact(two_s, 2 * ell as i64, two_s, -tm1, 2 * m, tm2);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        t[[i, j as usize]] = c(pref * sign * w, 0.0);
    }
    t
}

/// Spin-`(N−1)/2` matrices built directly from the ladder formula.
pub fn spin(n: usize) -> (CMat, CMat, CMat) {
    let s = (n as f64 - 1.0) / 2.0;
    let mut sx = CMat::zeros((n, n));
    let mut sy = CMat::zeros((n, n));
    let mut sz = CMat::zeros((n, n));
    for i in 0..n {
        let mi = s - i as f64;
        sz[[i, i]] = c(mi, 0.0);
        if i + 1 < n {
            // ⟨m+1|S₊|m⟩ with m = s − i − 1
            let mm = s - (i + 1) as f64;
            let a = ((s - mm) * (s + mm + 1.0)).sqrt();
            sx[[i, i + 1]] = c(a / 2.0, 0.0);
            sx[[i + 1, i]] = c(a / 2.0, 0.0);
            sy[[i, i + 1]] = c(0.0, -a / 2.0);
            sy[[i + 1, i]] = c(0.0, a / 2.0);
        }
    }
    (sx, sy, sz)
}

fn comm(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) - b.dot(a)
}

/// `Δ_N X = −Σ_a [S_a, [S_a, X]]` from the oracle spin matrices.
pub fn laplacian_dense(x: &CMat) -> CMat {
    let (a, b, cz) = spin(x.nrows());
    let mut out = CMat::zeros(x.raw_dim());
    for s in [&a, &b, &cz] {
        out = out - comm(s, &comm(s, x));
    }
    out
}

pub fn frob(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(a: &CMat) -> C64 {
    a.diag().sum()
}

/// SplitMix64, independent of the library's generator.
pub struct Mix(pub u64);

impl Mix {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

/// Random skew-Hermitian matrix with entries of order one.
pub fn random_skew(n: usize, seed: u64) -> SkewHermitianState {
    let mut r = Mix(seed);
    let a = CMat::from_shape_fn((n, n), |_| c(r.next_f64(), r.next_f64()));
    SkewHermitianState::from_skew_part(&a.view()).unwrap()
}

/// `(4π/N) tr(X^k)` by repeated multiplication.
pub fn casimir_by_powers(x: &CMat, k: usize) -> C64 {
    let n = x.nrows();
    let mut p = x.clone();
    for _ in 1..k {
        p = p.dot(x);
    }
    trace(&p) * (4.0 * std::f64::consts::PI / n as f64)
}
