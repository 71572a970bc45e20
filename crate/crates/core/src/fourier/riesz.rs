use num_traits::Zero;

use super::{Coefficients, RangeValue, SpectrumTable};
use crate::error::{Error, Result};
use crate::rational::{self, pow2, Rational};

pub const MAX_RIESZ_FACTORS: u32 = 20;

/// Largest frequency reached by `∏_{k=1}^{kmax}(1 + cos 2π3^k t)`:
/// `3 + 9 + … + 3^kmax`.
pub fn riesz_window(kmax: u32) -> i64 {
    (3i64.pow(kmax + 1) - 3) / 2
}

/// `μ̂(n)`: `2^{-#S}` when `n = Σ_{k∈S} ±3^k` with `S ⊂ {1, …, kmax}`,
/// otherwise 0. The representation is the balanced-ternary expansion of `n`.
pub fn riesz_coefficient(kmax: u32, n: i64) -> Rational {
    let mut rest = n as i128;
    let mut position = 0u32;
    let mut used = 0i64;
    while rest != 0 {
        let digit = match rest.rem_euclid(3) {
            0 => 0,
            1 => 1,
            _ => -1,
        };
        if digit != 0 {
            if position == 0 || position > kmax {
                return Rational::zero();
            }
            used += 1;
        }
        rest = (rest - digit) / 3;
        position += 1;
    }
    pow2(-used)
}

pub fn riesz_exact_coeffs(kmax: u32) -> Result<SpectrumTable> {
    if kmax > MAX_RIESZ_FACTORS {
        return Err(Error::invalid(format!(
            "at most {MAX_RIESZ_FACTORS} Riesz factors are supported, got {kmax}"
        )));
    }
    Ok(SpectrumTable {
        window: riesz_window(kmax),
        source: format!("Riesz product with factors 3^1..3^{kmax}"),
        values: Coefficients::Riesz { kmax },
    })
}

/// All `Σ_{k∈S} ±3^k` with `#S = m`, `S ⊂ {1, …, kmax}`.
fn signed_sums(kmax: u32, m: u32, out: &mut Vec<i64>) {
    fn go(k: u32, kmax: u32, left: u32, acc: i64, out: &mut Vec<i64>) {
        if left == 0 {
            out.push(acc);
            return;
        }
        if kmax + 1 - k < left {
            return;
        }
        let p = 3i64.pow(k);
        go(k + 1, kmax, left - 1, acc + p, out);
        go(k + 1, kmax, left - 1, acc - p, out);
        go(k + 1, kmax, left, acc, out);
    }
    if m <= kmax {
        go(1, kmax, m, 0, out);
    }
}

const MAX_LEVEL_SET: i64 = 10_000_000;

pub(super) fn level_set(kmax: u32, q: f64, tol: f64) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    for m in 0..=kmax {
        if (rational::to_f64(&pow2(-(m as i64))) - q).abs() <= tol {
            signed_sums(kmax, m, &mut out);
        }
    }
    if q.abs() <= tol {
        let window = riesz_window(kmax);
        if 2 * window + 1 > MAX_LEVEL_SET {
            return Err(Error::invalid("zero level set too large to enumerate"));
        }
        out.extend((-window..=window).filter(|&n| riesz_coefficient(kmax, n).is_zero()));
    }
    out.sort_unstable();
    Ok(out)
}

fn binomial(n: u32, k: u32) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

pub(super) fn range_census(kmax: u32, window: i64) -> Vec<RangeValue> {
    let support = 3u64.pow(kmax);
    let mut out = vec![RangeValue {
        exact: Some("0/1".into()),
        re: 0.0,
        im: 0.0,
        multiplicity: (2 * window + 1) as u64 - support,
    }];
    for m in (0..=kmax).rev() {
        let v = pow2(-(m as i64));
        out.push(RangeValue {
            exact: Some(rational::to_fraction_string(&v)),
            re: rational::to_f64(&v),
            im: 0.0,
            multiplicity: binomial(kmax, m) << m,
        });
    }
    out
}
