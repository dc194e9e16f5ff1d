//! Certified rational enclosures.
//!
//! Quantities such as `2^{-j(d-α)}` or `dist^{-α}` are irrational for most
//! rational `α`. They are carried as closed intervals `[lo, hi]` of exact
//! rationals that provably contain the true value. Endpoints are kept on a
//! dyadic grid of [`PRECISION_BITS`] significant bits, rounded outward after
//! every operation, so sums of many terms stay cheap while the relative width
//! of a single power stays below `2^-90`.

use std::ops::{Add, Mul};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::{bit_len, fmt_ratio, from_scaled, round_down, round_up, to_f64, Rational};

pub const PRECISION_BITS: u64 = 96;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Rational,
}

impl Serialize for Interval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [fmt_ratio(&self.lo), fmt_ratio(&self.hi)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let [lo, hi] = <[String; 2]>::deserialize(d)?;
        let lo = crate::rational::parse_ratio(&lo).map_err(D::Error::custom)?;
        let hi = crate::rational::parse_ratio(&hi).map_err(D::Error::custom)?;
        if lo > hi {
            return Err(D::Error::custom("interval with lo > hi"));
        }
        Ok(Interval { lo, hi })
    }
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        debug_assert!(lo <= hi, "inverted interval");
        Interval { lo, hi }
    }

    pub fn exact(q: Rational) -> Self {
        Interval {
            lo: q.clone(),
            hi: q,
        }
    }

    pub fn zero() -> Self {
        Self::exact(Rational::zero())
    }

    pub fn one() -> Self {
        Self::exact(Rational::one())
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, q: &Rational) -> bool {
        &self.lo <= q && q <= &self.hi
    }

    /// Whether the enclosure lies within `tol` of the real `x`.
    pub fn contains_f64_within(&self, x: f64, tol: f64) -> bool {
        to_f64(&self.lo) - tol <= x && x <= to_f64(&self.hi) + tol
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn mid_f64(&self) -> f64 {
        0.5 * (to_f64(&self.lo) + to_f64(&self.hi))
    }

    pub fn lo_f64(&self) -> f64 {
        to_f64(&self.lo)
    }

    pub fn hi_f64(&self) -> f64 {
        to_f64(&self.hi)
    }

    fn rounded(lo: Rational, hi: Rational) -> Self {
        Interval {
            lo: round_down(&lo, PRECISION_BITS),
            hi: round_up(&hi, PRECISION_BITS),
        }
    }

    pub fn scale(&self, k: &Rational) -> Interval {
        if k.is_negative() {
            Self::rounded(&self.hi * k, &self.lo * k)
        } else {
            Self::rounded(&self.lo * k, &self.hi * k)
        }
    }

    pub fn scale_int(&self, k: u64) -> Interval {
        self.scale(&Rational::from_integer(BigInt::from(k)))
    }

    /// Division by an interval that is strictly positive.
    pub fn div_pos(&self, d: &Interval) -> Interval {
        assert!(d.lo.is_positive(), "division by an interval touching zero");
        let cands = [
            &self.lo / &d.lo,
            &self.lo / &d.hi,
            &self.hi / &d.lo,
            &self.hi / &d.hi,
        ];
        let lo = cands.iter().min().unwrap().clone();
        let hi = cands.iter().max().unwrap().clone();
        Self::rounded(lo, hi)
    }

    /// `[1/hi, 1/lo]` for a strictly positive interval.
    pub fn recip(&self) -> Interval {
        assert!(self.lo.is_positive(), "reciprocal of an interval touching zero");
        Self::rounded(self.hi.recip(), self.lo.recip())
    }

    /// `self^exp` for a nonnegative interval and rational exponent.
    pub fn powr(&self, exp: &Rational) -> Interval {
        assert!(!self.lo.is_negative(), "power of a negative interval");
        if exp.is_zero() {
            return Interval::one();
        }
        let at = |x: &Rational| -> Interval {
            if x.is_zero() {
                Interval::zero()
            } else {
                pow_enclosure(x, exp)
            }
        };
        let a = at(&self.lo);
        let b = at(&self.hi);
        if exp.is_positive() {
            Interval { lo: a.lo, hi: b.hi }
        } else {
            assert!(self.lo.is_positive(), "negative power of an interval touching zero");
            Interval { lo: b.lo, hi: a.hi }
        }
    }

    pub fn max(&self, other: &Interval) -> Interval {
        Interval {
            lo: (&self.lo).max(&other.lo).clone(),
            hi: (&self.hi).max(&other.hi).clone(),
        }
    }

    pub fn min(&self, other: &Interval) -> Interval {
        Interval {
            lo: (&self.lo).min(&other.lo).clone(),
            hi: (&self.hi).min(&other.hi).clone(),
        }
    }

    /// Adds `[0, t]` on top.
    pub fn widen_up(&self, t: &Rational) -> Interval {
        Self::rounded(self.lo.clone(), &self.hi + t)
    }
}

impl Add for &Interval {
    type Output = Interval;
    fn add(self, rhs: &Interval) -> Interval {
        Interval::rounded(&self.lo + &rhs.lo, &self.hi + &rhs.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        &self + &rhs
    }
}

impl Mul for &Interval {
    type Output = Interval;
    fn mul(self, rhs: &Interval) -> Interval {
        let cands = [
            &self.lo * &rhs.lo,
            &self.lo * &rhs.hi,
            &self.hi * &rhs.lo,
            &self.hi * &rhs.hi,
        ];
        let lo = cands.iter().min().unwrap().clone();
        let hi = cands.iter().max().unwrap().clone();
        Interval::rounded(lo, hi)
    }
}

impl std::iter::Sum for Interval {
    fn sum<I: Iterator<Item = Interval>>(iter: I) -> Interval {
        iter.fold(Interval::zero(), |acc, x| &acc + &x)
    }
}

fn int_pow(q: &Rational, e: u64) -> Rational {
    Rational::new(
        num_traits::pow(q.numer().clone(), e as usize),
        num_traits::pow(q.denom().clone(), e as usize),
    )
}

/// Encloses `x^(1/n)` for rational `x > 0`.
pub fn root_enclosure(x: &Rational, n: u32) -> Interval {
    assert!(x.is_positive());
    if n == 1 {
        return Interval::exact(x.clone());
    }
    let nn = n as i64;
    // choose k so that the scaled root has PRECISION_BITS + 4 bits
    let mag = bit_len(x.numer()) as i64 - bit_len(x.denom()) as i64;
    let k = PRECISION_BITS as i64 + 4 - mag.div_euclid(nn);
    let shift = k * nn;
    let (n_num, d_num) = (x.numer().clone(), x.denom().clone());
    let (num, den) = if shift >= 0 {
        (n_num << (shift as u64), d_num)
    } else {
        (n_num, d_num << ((-shift) as u64))
    };
    let y_floor = &num / &den;
    let y_ceil = if (&y_floor * &den) == num {
        y_floor.clone()
    } else {
        &y_floor + BigInt::one()
    };
    let r_lo = y_floor.nth_root(n);
    let mut r_hi = y_ceil.nth_root(n);
    if num_traits::pow(r_hi.clone(), n as usize) < y_ceil {
        r_hi += BigInt::one();
    }
    let lo = from_scaled(r_lo, k);
    let hi = from_scaled(r_hi, k);
    Interval::rounded(lo, hi)
}

/// Encloses `base^exp` for rational `base > 0` and any rational `exp`.
pub fn pow_enclosure(base: &Rational, exp: &Rational) -> Interval {
    assert!(base.is_positive(), "pow_enclosure needs a positive base");
    if exp.is_zero() || base.is_one() {
        return Interval::one();
    }
    let p = exp.numer();
    let q: u32 = exp
        .denom()
        .try_into()
        .expect("exponent denominator too large");
    let a: u64 = p.abs().try_into().expect("exponent numerator too large");
    let raised = int_pow(base, a);
    let mag = if q == 1 {
        Interval::exact(raised)
    } else {
        root_enclosure(&raised, q)
    };
    let out = if p.is_negative() { mag.recip() } else { mag };
    Interval::rounded(out.lo, out.hi)
}

/// Encloses `2^-x` for rational `x`.
pub fn pow2_neg(x: &Rational) -> Interval {
    let two = Rational::from_integer(BigInt::from(2));
    pow_enclosure(&two, &-x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{dyadic, inv_pow2};

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn sqrt_two_enclosed() {
        let e = root_enclosure(&r(2, 1), 2);
        assert!(e.lo_f64() <= std::f64::consts::SQRT_2 && std::f64::consts::SQRT_2 <= e.hi_f64());
        // lo^2 <= 2 <= hi^2 exactly
        assert!(&e.lo * &e.lo <= r(2, 1));
        assert!(&e.hi * &e.hi >= r(2, 1));
        assert!(e.width() < &e.lo * inv_pow2(60));
    }

    #[test]
    fn integer_exponent_is_exact() {
        let e = pow_enclosure(&r(3, 2), &r(-2, 1));
        assert!(e.contains(&r(4, 9)));
        assert!(e.width() < inv_pow2(90));
        assert!(pow_enclosure(&r(1, 2), &r(3, 1)).is_exact());
    }

    #[test]
    fn tiny_and_huge_bases() {
        let tiny = inv_pow2(400);
        let e = pow_enclosure(&tiny, &r(1, 3));
        // (2^-400)^(1/3) = 2^(-133.33..)
        let f = (-400.0f64 / 3.0).exp2();
        assert!((e.mid_f64() / f - 1.0).abs() < 1e-12);
        assert!(e.width() < &e.lo * inv_pow2(60));
        let big = Rational::from_integer(BigInt::one() << 300u32);
        let e = pow_enclosure(&big, &r(-1, 2));
        assert!((e.mid_f64() / (-150.0f64).exp2() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pow2_neg_matches_float() {
        for (n, d) in [(1, 2), (7, 3), (631, 100), (0, 1), (-5, 4)] {
            let x = r(n, d);
            let e = pow2_neg(&x);
            let f = (-(n as f64) / d as f64).exp2();
            assert!(e.lo_f64() <= f * (1.0 + 1e-15) && f * (1.0 - 1e-15) <= e.hi_f64());
        }
    }

    #[test]
    fn interval_powers_are_monotone() {
        let i = Interval::new(dyadic(1, 2), dyadic(1, 0));
        let s = i.powr(&r(1, 2));
        assert!(s.lo_f64() <= 0.5 + 1e-15 && s.hi_f64() >= 1.0 - 1e-15);
        let t = i.powr(&r(-1, 2));
        assert!(t.lo_f64() <= 1.0 + 1e-15 && t.hi_f64() >= 2.0 - 1e-15);
    }
}
