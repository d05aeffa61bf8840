//! Double-double arithmetic.
//!
//! A value is stored as an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`,
//! giving roughly 32 significant decimal digits. Only the operations needed for
//! offline operator construction and slowly convergent series are provided.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
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

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const PI: Dd = Dd {
        hi: std::f64::consts::PI,
        lo: 1.224_646_799_147_353_2e-16,
    };

    #[inline]
    pub const fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Dd::new(num as f64) / Dd::new(den as f64)
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        // One Newton step on the f64 estimate doubles the precision.
        let x = self.hi.sqrt();
        let xx = Dd::new(x) * Dd::new(x);
        let corr = (self - xx).hi / (2.0 * x);
        let (s, e) = quick_two_sum(x, corr);
        Dd { hi: s, lo: e }
    }

    /// `(cos, sin)` of `2π·num/den` for integers `num`, `den > 0`.
    ///
    /// The angle is reduced exactly in integer arithmetic to an octant, so the
    /// result carries full double-double accuracy for any `num`.
    pub fn cos_sin_turn(num: i64, den: i64) -> (Dd, Dd) {
        assert!(den > 0);
        let r = num.rem_euclid(den) as i128;
        let den = den as i128;
        let u = 8 * r;
        let octant = (u / den) as i64;
        let rem = u - octant as i128 * den;
        // phi in [0, pi/4)
        let phi = Dd::PI * Dd::new(rem as f64) / Dd::new((4 * den) as f64);
        let (c, s) = taylor_cos_sin(phi);
        let h = Dd::new(0.5).sqrt();
        // angle = octant*pi/4 + phi
        let (co, so) = match octant {
            0 => (Dd::ONE, Dd::ZERO),
            1 => (h, h),
            2 => (Dd::ZERO, Dd::ONE),
            3 => (-h, h),
            4 => (-Dd::ONE, Dd::ZERO),
            5 => (-h, -h),
            6 => (Dd::ZERO, -Dd::ONE),
            _ => (h, -h),
        };
        (co * c - so * s, so * c + co * s)
    }
}

fn taylor_cos_sin(x: Dd) -> (Dd, Dd) {
    let x2 = x * x;
    let mut term = Dd::ONE;
    let mut cos = Dd::ONE;
    let mut k = 0.0;
    loop {
        term = -(term * x2) / Dd::new((k + 1.0) * (k + 2.0));
        k += 2.0;
        cos = cos + term;
        if term.hi.abs() < 1e-34 {
            break;
        }
    }
    let mut term = x;
    let mut sin = x;
    let mut k = 1.0;
    loop {
        term = -(term * x2) / Dd::new((k + 1.0) * (k + 2.0));
        k += 2.0;
        sin = sin + term;
        if term.hi.abs() < 1e-34 {
            break;
        }
    }
    (cos, sin)
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let s2 = s2 + t1;
        let (s1, s2) = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        let (hi, lo) = quick_two_sum(s1, s2);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::new(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Dd { hi: q1, lo: q2 } + Dd::new(q3)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_recovers_one_third_beyond_double_precision() {
        let third = Dd::ONE / Dd::new(3.0);
        let back = third * Dd::new(3.0) - Dd::ONE;
        assert!(back.to_f64().abs() < 1e-31);
    }

    #[test]
    fn sqrt_two_squared() {
        let r = Dd::new(2.0).sqrt();
        assert!((r * r - Dd::new(2.0)).to_f64().abs() < 1e-31);
    }

    #[test]
    fn turn_angles_match_f64_and_identity() {
        for (n, d) in [(0, 7), (1, 8), (3, 7), (-5, 12), (123, 1160), (57, 58)] {
            let (c, s) = Dd::cos_sin_turn(n, d);
            let a = 2.0 * std::f64::consts::PI * n as f64 / d as f64;
            assert!((c.to_f64() - a.cos()).abs() < 1e-15);
            assert!((s.to_f64() - a.sin()).abs() < 1e-15);
            let one = c * c + s * s - Dd::ONE;
            assert!(one.to_f64().abs() < 1e-30, "{n}/{d}: {}", one.to_f64());
        }
    }
}
