//! Wigner 3j symbols.
//!
//! Evaluated with the Racah single-sum formula. The prefactor is assembled
//! from log-factorials kept in double-double precision and the alternating
//! sum is accumulated in double-double arithmetic from exact term ratios, so
//! the result stays at ~1e-13 relative accuracy as long as the cancellation
//! factor (largest term over the sum) stays below ~1e17. For the symbols
//! `(s ℓ s; −m₁ m m₂)` used by the quantized basis this holds for all `N`
//! up to several hundred.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// A half-integer stored as twice its value, so `Half::doubled(3)` is `3/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Half(i64);

impl Half {
    pub const fn doubled(twice: i64) -> Self {
        Half(twice)
    }

    pub const fn int(k: i64) -> Self {
        Half(2 * k)
    }

    pub const fn twice(self) -> i64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)`.
///
/// Returns exactly zero when a selection rule fails. Negative `j`, `|m| > j`
/// or a `j`/`m` parity mismatch is a domain error.
pub fn wigner3j(j1: Half, j2: Half, j3: Half, m1: Half, m2: Half, m3: Half) -> Result<f64> {
    let (tj1, tj2, tj3) = (j1.twice(), j2.twice(), j3.twice());
    let (tm1, tm2, tm3) = (m1.twice(), m2.twice(), m3.twice());
    for (tj, tm) in [(tj1, tm1), (tj2, tm2), (tj3, tm3)] {
        if tj < 0 {
            return Err(Error::Domain(format!("negative angular momentum j = {}", tj as f64 / 2.0)));
        }
        if (tj - tm).rem_euclid(2) != 0 {
            return Err(Error::Domain(format!(
                "parity mismatch between j = {} and m = {}",
                tj as f64 / 2.0,
                tm as f64 / 2.0
            )));
        }
        if tm.abs() > tj {
            return Err(Error::Domain(format!(
                "|m| = {} exceeds j = {}",
                tm.abs() as f64 / 2.0,
                tj as f64 / 2.0
            )));
        }
    }
    if tm1 + tm2 + tm3 != 0 {
        return Ok(0.0);
    }
    if tj3 > tj1 + tj2 || tj3 < (tj1 - tj2).abs() {
        return Ok(0.0);
    }
    Ok(racah_sum(tj1, tj2, tj3, tm1, tm2, tm3))
}

/// Racah formula for arguments that already passed every selection rule.
/// All arguments are doubled.
pub(crate) fn racah_sum(tj1: i64, tj2: i64, tj3: i64, tm1: i64, tm2: i64, tm3: i64) -> f64 {
    // Integer combinations appearing in the factorials.
    let jsum = (tj1 + tj2 + tj3) / 2;
    let b1 = (tj1 + tj2 - tj3) / 2; // j1 + j2 − j3
    let b2 = (tj1 - tm1) / 2; // j1 − m1
    let b3 = (tj2 + tm2) / 2; // j2 + m2
    let a1 = (tj3 - tj2 + tm1) / 2; // j3 − j2 + m1
    let a2 = (tj3 - tj1 - tm2) / 2; // j3 − j1 − m2

    let kmin = 0.max(-a1).max(-a2);
    let kmax = b1.min(b2).min(b3);
    if kmin > kmax {
        return 0.0;
    }

    let lf = |n: i64| ln_factorial(n as usize);

    // ln of sqrt(Δ · Π (j ± m)!)
    let mut ln_pref = Dd::ZERO;
    for n in [b1, (tj1 - tj2 + tj3) / 2, (-tj1 + tj2 + tj3) / 2] {
        ln_pref = ln_pref + lf(n);
    }
    ln_pref = ln_pref - lf(jsum + 1);
    for (tj, tm) in [(tj1, tm1), (tj2, tm2), (tj3, tm3)] {
        ln_pref = ln_pref + lf((tj + tm) / 2) + lf((tj - tm) / 2);
    }
    ln_pref = ln_pref.mul_f64(0.5);

    // Denominator of the first retained term.
    let k = kmin;
    let ln_first = lf(k) + lf(a1 + k) + lf(a2 + k) + lf(b1 - k) + lf(b2 - k) + lf(b3 - k);
    let ln_mag = ln_pref - ln_first;

    // Alternating sum relative to the first term; each ratio is exact in
    // small integers.
    let mut ratio = Dd::ONE;
    let mut sum = Dd::ONE;
    for k in kmin..kmax {
        let num = ((b1 - k) * (b2 - k) * (b3 - k)) as f64;
        let den = ((k + 1) * (a1 + k + 1) * (a2 + k + 1)) as f64;
        ratio = ratio.mul_f64(-num).div_f64(den);
        sum = sum + ratio;
    }

    let phase_exp = (tj1 - tj2 - tm3) / 2 + kmin;
    let sign = if phase_exp.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let mag = ln_mag.hi.exp() * (1.0 + ln_mag.lo);
    sign * mag * (sum.hi + sum.lo)
}

// ---------------------------------------------------------------------------
// log-factorial table

const LN2_HI: f64 = std::f64::consts::LN_2;
const LN2_LO: f64 = 2.319_046_813_846_299_6e-17;
const TABLE_LEN: usize = 1 << 13;

fn ln_factorial(n: usize) -> Dd {
    static TABLE: OnceLock<Vec<Dd>> = OnceLock::new();
    let table = TABLE.get_or_init(build_ln_factorials);
    match table.get(n) {
        Some(v) => *v,
        None => ln_factorial_direct(n),
    }
}

fn build_ln_factorials() -> Vec<Dd> {
    let mut out = Vec::with_capacity(TABLE_LEN);
    // n! = mantissa · 2^exp with the mantissa renormalised into [1, 2).
    let mut mant = Dd::ONE;
    let mut exp: i64 = 0;
    out.push(Dd::ZERO);
    for k in 1..TABLE_LEN {
        mant = mant.mul_f64(k as f64);
        let e = exponent_of(mant.hi);
        if e != 0 {
            let scale = 2f64.powi(-e as i32);
            mant = Dd {
                hi: mant.hi * scale,
                lo: mant.lo * scale,
            };
            exp += e;
        }
        out.push(ln_of_scaled(mant, exp));
    }
    out
}

fn ln_factorial_direct(n: usize) -> Dd {
    let mut mant = Dd::ONE;
    let mut exp: i64 = 0;
    for k in 1..=n {
        mant = mant.mul_f64(k as f64);
        let e = exponent_of(mant.hi);
        let scale = 2f64.powi(-e as i32);
        mant = Dd {
            hi: mant.hi * scale,
            lo: mant.lo * scale,
        };
        exp += e;
    }
    ln_of_scaled(mant, exp)
}

fn ln_of_scaled(mant: Dd, exp: i64) -> Dd {
    let e = exp as f64;
    let ln2e = Dd::from_product(LN2_HI, e) + Dd::from_product(LN2_LO, e);
    ln2e + Dd::from_f64(mant.hi.ln()) + Dd::from_f64(mant.lo / mant.hi)
}

/// Binary exponent `e` with `x / 2^e ∈ [1, 2)` for positive normal `x`.
fn exponent_of(x: f64) -> i64 {
    ((x.to_bits() >> 52) & 0x7ff) as i64 - 1023
}

// ---------------------------------------------------------------------------
// double-double arithmetic, just enough for the Racah sum

#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn from_product(a: f64, b: f64) -> Dd {
        let p = a * b;
        Dd {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    fn mul_f64(self, b: f64) -> Dd {
        let p = Dd::from_product(self.hi, b);
        quick_two_sum(p.hi, p.lo + self.lo * b)
    }

    fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let p = Dd::from_product(q1, b);
        let (s, mut e) = two_sum(self.hi, -p.hi);
        e -= p.lo;
        e += self.lo;
        let q2 = (s + e) / b;
        quick_two_sum(q1, q2)
    }
}

impl std::ops::Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum_pair(s, e + t);
        quick_two_sum(s, e + f)
    }
}

impl std::ops::Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + Dd {
            hi: -o.hi,
            lo: -o.lo,
        }
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum_pair(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> Dd {
    let (hi, lo) = quick_two_sum_pair(a, b);
    Dd { hi, lo }
}
