//! Finite truncations of the Liouville-type Cantor set
//! `⋂_k ⋃_{p prime in [M_k, 2M_k]} {x : ‖px‖ ≤ p^{-1-k}}`.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{check_resolution, make_uniform, DyadicMeasure};
use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Closed interval `[lo, hi]` inside `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "rational::serde_str")]
    pub lo: Rational,
    #[serde(with = "rational::serde_str")]
    pub hi: Rational,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn merge(mut intervals: Vec<Interval>) -> Vec<Interval> {
    intervals.sort_by(|a, b| a.lo.cmp(&b.lo));
    let mut out: Vec<Interval> = Vec::with_capacity(intervals.len());
    for iv in intervals {
        match out.last_mut() {
            Some(last) if iv.lo <= last.hi => {
                if iv.hi > last.hi {
                    last.hi = iv.hi;
                }
            }
            _ => out.push(iv),
        }
    }
    out
}

fn intersect(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let lo = a[i].lo.clone().max(b[j].lo.clone());
        let hi = a[i].hi.clone().min(b[j].hi.clone());
        if lo <= hi {
            out.push(Interval { lo, hi });
        }
        if a[i].hi < b[j].hi {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Union over primes `p ∈ [m, 2m]` of the intervals `j/p ± p^{-2-k}`,
/// clipped to `[0, 1]`.
fn level_set(m: u64, k: u32) -> Result<Vec<Interval>> {
    let primes: Vec<u64> = (m..=2 * m).filter(|&p| is_prime(p)).collect();
    if primes.is_empty() {
        return Err(Error::invalid(format!("no prime in [{m}, {}]", 2 * m)));
    }
    let zero = Rational::zero();
    let one = Rational::one();
    let mut intervals = Vec::new();
    for p in primes {
        let pb = BigInt::from(p);
        let radius = Rational::new(BigInt::one(), num_traits::pow(pb.clone(), k as usize + 2));
        for j in 0..=p {
            let centre = Rational::new(BigInt::from(j), pb.clone());
            let lo = (&centre - &radius).max(zero.clone());
            let hi = (&centre + &radius).min(one.clone());
            intervals.push(Interval { lo, hi });
        }
    }
    Ok(merge(intervals))
}

/// The exact interval set after intersecting all levels.
pub fn liouville_intervals(levels: &[(u64, u32)]) -> Result<Vec<Interval>> {
    for w in levels.windows(2) {
        if w[1].0 <= 2 * w[0].0 {
            return Err(Error::invalid(format!(
                "bands must be separated: need M_next > 2·M, got {} after {}",
                w[1].0, w[0].0
            )));
        }
    }
    let mut current = vec![Interval {
        lo: Rational::zero(),
        hi: Rational::one(),
    }];
    for (idx, &(m, k)) in levels.iter().enumerate() {
        if m == 0 {
            return Err(Error::invalid("band parameter M must be positive"));
        }
        current = intersect(&current, &level_set(m, k)?);
        if current.is_empty() {
            return Err(Error::EmptyIntersection { level: idx + 1 });
        }
    }
    Ok(current)
}

/// Grid cells `[c·2^-K, (c+1)·2^-K)` meeting a closed interval. The point 1
/// is identified with 0.
fn cells_meeting(iv: &Interval, resolution: u32) -> (u64, u64) {
    let n = rational::pow2_int(resolution);
    let last = (1u64 << resolution) - 1;
    let to_cell = |x: &Rational| -> u64 {
        let c: u64 = rational::floor(&(x * Rational::from_integer(n.clone())))
            .try_into()
            .unwrap_or(u64::MAX);
        c.min(last)
    };
    (to_cell(&iv.lo), to_cell(&iv.hi))
}

/// Uniform measure on the grid cells meeting the truncated set.
pub fn make_liouville_truncation(levels: &[(u64, u32)], resolution: u32) -> Result<DyadicMeasure> {
    check_resolution(resolution)?;
    if levels.is_empty() {
        return make_uniform(resolution);
    }
    let intervals = liouville_intervals(levels)?;
    let mut cells = std::collections::BTreeSet::new();
    for iv in &intervals {
        if iv.hi == Rational::one() {
            cells.insert(0);
        }
        let (a, b) = cells_meeting(iv, resolution);
        if b - a > 1 << 26 {
            return Err(Error::invalid("truncated set covers too many cells"));
        }
        cells.extend(a..=b);
    }
    super::make_sparse(&cells, resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::frac;

    /// Independent oracle: test each cell against every prime's intervals
    /// directly, without merging or intersecting interval lists.
    fn brute_cells(levels: &[(u64, u32)], resolution: u32) -> usize {
        let n = 1u64 << resolution;
        let grid = Rational::from_integer(BigInt::from(n));
        let radius = |p: u64, e: u32| Rational::new(BigInt::one(), num_traits::pow(BigInt::from(p), e as usize));
        let primes = |m: u64| (m..=2 * m).filter(|&p| is_prime(p)).collect::<Vec<_>>();
        let member = |x: &Rational| {
            levels.iter().all(|&(m, k)| {
                primes(m).into_iter().any(|p| {
                    let f = rational::frac_part(&(x * Rational::from_integer(BigInt::from(p))));
                    let dist = f.clone().min(Rational::one() - f);
                    dist <= radius(p, k + 1)
                })
            })
        };
        (0..n)
            .filter(|&c| {
                let a = Rational::from_integer(BigInt::from(c)) / &grid;
                let b = Rational::from_integer(BigInt::from(c + 1)) / &grid;
                // A closed set meets [a, b) iff it contains a or one of its
                // left endpoints lies inside; those are all of the form j/p - r.
                let mut candidates = vec![a.clone()];
                for &(m, k) in levels {
                    for p in primes(m) {
                        for j in 0..=p {
                            let x = frac(j as i64, p as i64) - radius(p, k + 2);
                            if x >= a && x < b {
                                candidates.push(x);
                            }
                        }
                    }
                }
                candidates.iter().any(&member)
            })
            .count()
    }

    #[test]
    fn empty_levels_give_uniform() {
        assert_eq!(make_liouville_truncation(&[], 5).unwrap(), make_uniform(5).unwrap());
    }

    #[test]
    fn one_level_matches_oracle() {
        let mu = make_liouville_truncation(&[(5, 1)], 10).unwrap();
        assert_eq!(mu.support_size(), brute_cells(&[(5, 1)], 10));
        // cells near 1/5 and 1/7 survive
        for (j, p) in [(1u64, 5u64), (3, 7)] {
            let cell = (j << 10) / p;
            assert!(mu.atoms().contains_key(&cell), "cell near {j}/{p}");
        }
    }

    #[test]
    fn second_level_shrinks_support() {
        let one = make_liouville_truncation(&[(5, 1)], 14).unwrap();
        let two = make_liouville_truncation(&[(5, 1), (11, 2)], 14).unwrap();
        assert!(two.support_size() < one.support_size());
        assert_eq!(two.support_size(), brute_cells(&[(5, 1), (11, 2)], 14));
    }

    #[test]
    fn bad_bands_rejected() {
        assert!(make_liouville_truncation(&[(5, 1), (8, 2)], 8).is_err());
        assert!(make_liouville_truncation(&[(0, 1)], 8).is_err());
    }
}
