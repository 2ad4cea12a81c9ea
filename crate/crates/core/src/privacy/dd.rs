//! Double-double arithmetic (about 106 significant bits).
//!
//! The noise-scale formulas are short chains of `log`, `sqrt`, `exp` and
//! rational operations. Evaluating them in double-double and rounding once
//! at the end gives results within one ulp of the exact value, independent
//! of how the chain is parenthesized.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from_f64(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    /// Nearest `f64`.
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    fn scale_pow2(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let s = self.hi.sqrt();
        let (p, e) = two_prod(s, s);
        let r = (self - Dd { hi: p, lo: e }).hi;
        let (hi, lo) = quick_two_sum(s, r / (2.0 * s));
        Dd { hi, lo }
    }

    /// Returns `(k, s)` with `e^x = 2^k (1 + s)` and `|s|` below about `0.42`.
    fn exp_parts(self) -> (i32, Dd) {
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2 * Dd::from_f64(k);
        // exp(r) - 1 on r / 2^9, then undo the halving with (s+1)^2 - 1 = 2s + s^2.
        let r = r.scale_pow2(-9);
        let mut term = r;
        let mut s = r;
        for i in 2..=12 {
            term = term * r / Dd::from_f64(i as f64);
            s = s + term;
        }
        for _ in 0..9 {
            s = s.scale_pow2(1) + s * s;
        }
        (k as i32, s)
    }

    /// `e^x - 1`, accurate for small `x` as well.
    pub fn exp_m1(self) -> Self {
        if self.hi == f64::INFINITY {
            return Dd::from_f64(f64::INFINITY);
        }
        match self.exp_parts() {
            (0, s) => s,
            (k, s) => (s + Dd::ONE).scale_pow2(k) - Dd::ONE,
        }
    }

    pub fn exp(self) -> Self {
        if self.hi == f64::INFINITY {
            return Dd::from_f64(f64::INFINITY);
        }
        let (k, s) = self.exp_parts();
        (s + Dd::ONE).scale_pow2(k)
    }

    /// Natural logarithm by one Newton step on `exp` from the `f64` estimate.
    pub fn ln(self) -> Self {
        let y = Dd::from_f64(self.hi.ln());
        y + self * (-y).exp() - Dd::ONE
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi));
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::from_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::from_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}

impl From<f64> for Dd {
    fn from(v: f64) -> Self {
        Dd::from_f64(v)
    }
}

impl From<usize> for Dd {
    fn from(v: usize) -> Self {
        let hi = v as f64;
        // Exact for v < 2^106.
        let lo = (v as u128 as i128 - hi as u128 as i128) as f64;
        Dd { hi, lo }
    }
}

/// `1 + 2 sqrt(log(a)/M) + 2 log(a)/M`, the concentration factor shared by
/// the projection norm bound and the sensitivities.
pub fn concentration_factor(a: Dd, m: usize) -> Dd {
    let g = a.ln() / Dd::from(m);
    Dd::ONE + Dd::from(2.0) * g.sqrt() + Dd::from(2.0) * g
}
