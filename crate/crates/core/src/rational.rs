//! Exact rational helpers: parsing and printing the `"p/q"` wire form,
//! dyadic constructors, and directed decimal rendering for CSV output.

use std::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed rational {input:?}: {reason}")]
pub struct ParseRationalError {
    pub input: String,
    pub reason: &'static str,
}

fn parse_int(s: &str, full: &str) -> Result<BigInt, ParseRationalError> {
    let trimmed = s.trim();
    if trimmed.is_empty()
        || !trimmed
            .trim_start_matches(['-', '+'])
            .chars()
            .all(|c| c.is_ascii_digit())
        || trimmed.trim_start_matches(['-', '+']).is_empty()
    {
        return Err(ParseRationalError {
            input: full.to_string(),
            reason: "expected an integer numerator/denominator",
        });
    }
    trimmed.parse::<BigInt>().map_err(|_| ParseRationalError {
        input: full.to_string(),
        reason: "integer out of range",
    })
}

/// Parses the decimal-free `"p/q"` form (a bare integer `"p"` is accepted too).
pub fn parse_ratio(s: &str) -> Result<Rational, ParseRationalError> {
    match s.split_once('/') {
        Some((n, d)) => {
            let n = parse_int(n, s)?;
            let d = parse_int(d, s)?;
            if d.is_zero() {
                return Err(ParseRationalError {
                    input: s.to_string(),
                    reason: "zero denominator",
                });
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(parse_int(s, s)?)),
    }
}

/// Like [`parse_ratio`] but also accepts finite decimals such as `0.05`,
/// converted exactly. Used for command-line arguments.
pub fn parse_decimal_or_ratio(s: &str) -> Result<Rational, ParseRationalError> {
    let t = s.trim();
    if let Some((int_part, frac_part)) = t.split_once('.') {
        if frac_part.is_empty() || !frac_part.chars().all(|c| c.is_ascii_digit()) {
            return Err(ParseRationalError {
                input: s.to_string(),
                reason: "bad decimal fraction",
            });
        }
        let negative = int_part.starts_with('-');
        let int_digits = int_part.trim_start_matches(['-', '+']);
        let whole = if int_digits.is_empty() {
            BigInt::zero()
        } else {
            parse_int(int_digits, s)?
        };
        let scale = num_traits::pow(BigInt::from(10u32), frac_part.len());
        let frac = parse_int(frac_part, s)?;
        let mut q = Rational::new(whole * &scale + frac, scale);
        if negative {
            q = -q;
        }
        Ok(q)
    } else {
        parse_ratio(t)
    }
}

/// Always prints `p/q`, including `q = 1`.
pub fn fmt_ratio(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// `k / 2^j`.
pub fn dyadic(k: u64, j: u32) -> Rational {
    Rational::new(BigInt::from(k), pow2(j as u64))
}

pub fn pow2(n: u64) -> BigInt {
    BigInt::one() << n
}

/// `2^-n` as a rational.
pub fn inv_pow2(n: u64) -> Rational {
    Rational::new(BigInt::one(), pow2(n))
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        if q.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Number of significant bits of `|n|` (0 for zero).
pub fn bit_len(n: &BigInt) -> u64 {
    n.bits()
}

/// `floor(q * 2^e)` for any signed shift `e`.
pub fn floor_scaled(q: &Rational, e: i64) -> BigInt {
    let (n, d) = (q.numer(), q.denom());
    if e >= 0 {
        (n << (e as u64)).div_floor(d)
    } else {
        n.div_floor(&(d << ((-e) as u64)))
    }
}

/// `m * 2^-e` for any signed shift `e`.
pub fn from_scaled(m: BigInt, e: i64) -> Rational {
    if e >= 0 {
        Rational::new(m, pow2(e as u64))
    } else {
        Rational::from_integer(m << ((-e) as u64))
    }
}

/// Rounds toward −∞ onto a dyadic grid holding about `bits` significant bits.
pub fn round_down(q: &Rational, bits: u64) -> Rational {
    if q.is_zero() {
        return q.clone();
    }
    if q.denom().is_one() || is_short_dyadic(q, bits) {
        return q.clone();
    }
    let mag = bit_len(q.numer()) as i64 - bit_len(q.denom()) as i64;
    let e = bits as i64 - mag;
    from_scaled(floor_scaled(q, e), e)
}

/// Rounds toward +∞ onto a dyadic grid holding about `bits` significant bits.
pub fn round_up(q: &Rational, bits: u64) -> Rational {
    -round_down(&-q, bits)
}

fn is_short_dyadic(q: &Rational, bits: u64) -> bool {
    let d = q.denom();
    // power of two denominator and a numerator that already fits
    d.sign() == Sign::Plus
        && (d & (d - BigInt::one())).is_zero()
        && bit_len(q.numer()) <= bits + 1
}

/// Decimal rendering rounded toward −∞ (`up = false`) or +∞ (`up = true`)
/// with `digits` places after the point.
pub fn decimal_directed(q: &Rational, digits: usize, up: bool) -> String {
    let scale = num_traits::pow(BigInt::from(10u32), digits);
    let scaled = q * Rational::from_integer(scale.clone());
    let m = if up { scaled.ceil() } else { scaled.floor() }.to_integer();
    let negative = m.is_negative();
    let mag = m.abs();
    let (int_part, frac_part) = mag.div_rem(&scale);
    let mut frac = frac_part.to_string();
    while frac.len() < digits {
        frac.insert(0, '0');
    }
    let sign = if negative { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac}")
    }
}

/// Display wrapper printing `p/q`.
pub struct Ratio<'a>(pub &'a Rational);

impl fmt::Display for Ratio<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

/// A rational that (de)serializes as a `"p/q"` string; handy inside nested
/// containers where field adapters do not reach.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WireRational(pub Rational);

impl serde::Serialize for WireRational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_ratio(&self.0))
    }
}

impl<'de> serde::Deserialize<'de> for WireRational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let s = String::deserialize(d)?;
        parse_ratio(&s).map(WireRational).map_err(D::Error::custom)
    }
}

/// Serde adapters for the `"p/q"` string form.
pub mod serde_ratio {
    use super::*;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_ratio(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_ratio(&s).map_err(D::Error::custom)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for q in v {
                seq.serialize_element(&fmt_ratio(q))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
            let v = Vec::<String>::deserialize(d)?;
            v.iter()
                .map(|s| parse_ratio(s).map_err(D::Error::custom))
                .collect()
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(q: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
            match q {
                Some(q) => s.serialize_some(&fmt_ratio(q)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<Option<Rational>, D::Error> {
            let v = Option::<String>::deserialize(d)?;
            v.map(|s| parse_ratio(&s).map_err(D::Error::custom))
                .transpose()
        }
    }
}
