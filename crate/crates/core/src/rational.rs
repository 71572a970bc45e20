//! Exact rational helpers shared by every module.
//!
//! All masses, positions and parameters live in [`Rational`] (an arbitrary
//! precision fraction). Irrational quantities such as `2^α` are never
//! materialized; comparisons against them go through [`Pow2`].

use std::cmp::Ordering;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn frac(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn pow2_int(exp: u32) -> BigInt {
    BigInt::one() << exp as usize
}

/// `2^exp` for a signed integer exponent.
pub fn pow2(exp: i64) -> Rational {
    if exp >= 0 {
        Rational::from_integer(pow2_int(exp as u32))
    } else {
        Rational::new(BigInt::one(), pow2_int((-exp) as u32))
    }
}

/// `num / 2^exp`.
pub fn dyadic(num: i64, exp: u32) -> Rational {
    Rational::new(BigInt::from(num), pow2_int(exp))
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Fall back to a scaled division when the ratio over/underflows the
        // direct conversion.
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact conversion of a finite float.
pub fn from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::invalid(format!("non-finite value {x}")))
}

pub fn floor(x: &Rational) -> BigInt {
    x.numer().div_floor(x.denom())
}

pub fn ceil(x: &Rational) -> BigInt {
    -((-x.numer()).div_floor(x.denom()))
}

/// Fractional part in `[0, 1)`.
pub fn frac_part(x: &Rational) -> Rational {
    x - Rational::from_integer(floor(x))
}

pub fn abs(x: &Rational) -> Rational {
    x.abs()
}

/// Formats as `num/den`, always with an explicit denominator.
pub fn to_fraction_string(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parses `a/b`, integers, decimals (`-0.75`) and decimal scientific
/// notation (`1e-3`) into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::invalid(format!("cannot parse `{s}` as a rational"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::invalid(format!("zero denominator in `{s}`")));
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, fraction) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && fraction.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(fraction.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all_digits = format!("{whole}{fraction}");
    let mut value = Rational::from_integer(all_digits.parse::<BigInt>().map_err(|_| bad())?);
    let scale = exponent as i64 - fraction.len() as i64;
    let ten = Rational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= num_traits::pow(ten, scale as usize);
    } else {
        value /= num_traits::pow(ten, (-scale) as usize);
    }
    Ok(if negative { -value } else { value })
}

/// `⌊2^x⌋` for `x ≥ 0`, saturating at `u64::MAX`.
pub fn floor_pow2(x: &Rational) -> u64 {
    if x.is_negative() {
        return 0;
    }
    let approx = to_f64(x);
    if approx >= 63.5 {
        return u64::MAX;
    }
    let mut m = approx.exp2().floor() as u64;
    let fits = |m: u64| Pow2(x.clone()).cmp_scaled(&int(m as i64), &Rational::one()) != Ordering::Greater;
    while m > 0 && !fits(m) {
        m -= 1;
    }
    while m < u64::MAX && fits(m + 1) {
        m += 1;
    }
    m
}

/// The (generally irrational) number `2^e` for a rational exponent `e`.
///
/// Comparisons are exact: a float fast path settles clear cases and a
/// power-raising fallback settles near-ties.
#[derive(Clone, Debug, PartialEq)]
pub struct Pow2(pub Rational);

impl Pow2 {
    pub fn exponent(&self) -> &Rational {
        &self.0
    }

    pub fn approx(&self) -> f64 {
        to_f64(&self.0).exp2()
    }

    /// Ordering of `x` against `2^e · y`.
    pub fn cmp_scaled(&self, x: &Rational, y: &Rational) -> Ordering {
        let sx = x.numer().sign();
        let sy = y.numer().sign();
        match (sx, sy) {
            (Sign::NoSign, Sign::NoSign) => return Ordering::Equal,
            (_, Sign::NoSign) => return if sx == Sign::Plus { Ordering::Greater } else { Ordering::Less },
            (Sign::NoSign, _) => return if sy == Sign::Plus { Ordering::Less } else { Ordering::Greater },
            (Sign::Plus, Sign::Minus) => return Ordering::Greater,
            (Sign::Minus, Sign::Plus) => return Ordering::Less,
            _ => {}
        }
        let xf = to_f64(x);
        let rhs = self.approx() * to_f64(y);
        let scale = xf.abs().max(rhs.abs());
        if scale.is_finite() && scale > 0.0 && (xf - rhs).abs() > 1e-9 * scale {
            return xf.partial_cmp(&rhs).unwrap_or(Ordering::Equal);
        }
        let ord = self.cmp_exact_positive(&x.abs(), &y.abs());
        if sx == Sign::Minus {
            ord.reverse()
        } else {
            ord
        }
    }

    fn cmp_exact_positive(&self, x: &Rational, y: &Rational) -> Ordering {
        // x vs 2^(p/q) y  <=>  x^q vs 2^p y^q
        let p = self.0.numer();
        let q = self
            .0
            .denom()
            .to_usize()
            .expect("exponent denominator too large for exact comparison");
        let mut lhs = num_traits::pow(x.clone(), q);
        let mut rhs = num_traits::pow(y.clone(), q);
        let shift = p
            .abs()
            .to_usize()
            .expect("exponent numerator too large for exact comparison");
        if p.is_negative() {
            lhs *= Rational::from_integer(BigInt::one() << shift);
        } else {
            rhs *= Rational::from_integer(BigInt::one() << shift);
        }
        lhs.cmp(&rhs)
    }
}

/// Serde adapters that store rationals as `"num/den"` strings.
pub mod serde_str {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&to_fraction_string(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let raw = String::deserialize(d)?;
        parse_rational(&raw).map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(xs: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(xs.len()))?;
            for x in xs {
                seq.serialize_element(&to_fraction_string(x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
            let raw = Vec::<String>::deserialize(d)?;
            raw.iter()
                .map(|r| parse_rational(r).map_err(serde::de::Error::custom))
                .collect()
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(x: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
            match x {
                Some(x) => s.serialize_some(&to_fraction_string(x)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Rational>, D::Error> {
            let raw = Option::<String>::deserialize(d)?;
            raw.map(|r| parse_rational(&r).map_err(serde::de::Error::custom))
                .transpose()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        assert_eq!(parse_rational("3/4").unwrap(), frac(3, 4));
        assert_eq!(parse_rational("-0.75").unwrap(), frac(-3, 4));
        assert_eq!(parse_rational("0.25").unwrap(), frac(1, 4));
        assert_eq!(parse_rational("1e-3").unwrap(), frac(1, 1000));
        assert_eq!(parse_rational("12").unwrap(), int(12));
        assert_eq!(parse_rational(".5").unwrap(), frac(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn floor_ceil_and_fraction() {
        assert_eq!(floor(&frac(-1, 3)), BigInt::from(-1));
        assert_eq!(ceil(&frac(-1, 3)), BigInt::from(0));
        assert_eq!(ceil(&frac(7, 3)), BigInt::from(3));
        assert_eq!(frac_part(&frac(-1, 4)), frac(3, 4));
    }

    #[test]
    fn floor_pow2_handles_exact_powers() {
        assert_eq!(floor_pow2(&int(0)), 1);
        assert_eq!(floor_pow2(&int(10)), 1024);
        assert_eq!(floor_pow2(&frac(1, 2)), 1);
        assert_eq!(floor_pow2(&frac(12, 2)), 64);
        // 2^(13/2) = 90.50...
        assert_eq!(floor_pow2(&frac(13, 2)), 90);
        assert_eq!(floor_pow2(&int(70)), u64::MAX);
    }

    #[test]
    fn pow2_comparison_is_exact_at_ties() {
        let half = Pow2(frac(-1, 2));
        // 2^(-1/2) * 2 = sqrt(2) > 1.41421356
        assert_eq!(half.cmp_scaled(&frac(141421356, 100000000), &int(2)), Ordering::Less);
        assert_eq!(half.cmp_scaled(&frac(141421357, 100000000), &int(2)), Ordering::Greater);
        // 2^(-1) * 4 == 2 exactly
        assert_eq!(Pow2(int(-1)).cmp_scaled(&int(2), &int(4)), Ordering::Equal);
        // signs
        assert_eq!(half.cmp_scaled(&int(-1), &int(1)), Ordering::Less);
        assert_eq!(half.cmp_scaled(&int(-1), &int(-2)), Ordering::Greater);
        assert_eq!(half.cmp_scaled(&int(0), &int(0)), Ordering::Equal);
    }

    #[test]
    fn fraction_strings_round_trip() {
        let x = frac(-22, 7);
        assert_eq!(to_fraction_string(&x), "-22/7");
        assert_eq!(parse_rational(&to_fraction_string(&x)).unwrap(), x);
        assert_eq!(to_fraction_string(&int(3)), "3/1");
    }
}
