//! Walsh–Stieltjes expansions, Haar coefficients and the linear map between
//! their level groups, plus Lorentz `W(k)` statistics built on top.
//!
//! Rademacher convention: `r_i(t) = 1 − 2·d_i(t)` where `d_i` is the `i`-th
//! binary digit of `t`. A finite set `A ⊂ {1, 2, …}` is stored as a bit mask
//! with bit `i − 1` standing for `i`.

mod stats;

use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::DyadicMeasure;
use crate::rational::{self, Rational};

pub use stats::{
    default_theta_c, dimension_bound_check, g_lambda, turbulence_aggregates, lorentz_level_statistic,
    DimensionMode, DimensionVerdict, LevelStat, LorentzStats, TurbulenceAggregates, TurbulenceLevel,
    LorentzOptions,
};

/// Largest level for exact expansions (`2^16` coefficients).
pub const MAX_WALSH_LEVEL: u32 = 16;
/// Largest level for which the Walsh-to-Haar matrix is materialized.
pub const MAX_MATRIX_LEVEL: u32 = 12;

fn digit(i: u32, t: &Rational) -> Result<u8> {
    if i == 0 {
        return Err(Error::invalid("Rademacher functions are indexed from 1"));
    }
    let x = rational::frac_part(t) * rational::pow2(i as i64);
    let f = rational::floor(&x);
    Ok(if (f % 2u8).is_zero() { 0 } else { 1 })
}

pub fn rademacher(i: u32, t: &Rational) -> Result<i8> {
    Ok(1 - 2 * digit(i, t)? as i8)
}

/// `w_A(t) = ∏_{i∈A} r_i(t)`; the empty product is 1.
pub fn walsh_eval(set: &[u32], t: &Rational) -> Result<i8> {
    set.iter().try_fold(1i8, |acc, &i| Ok(acc * rademacher(i, t)?))
}

pub fn set_to_mask(set: &[u32]) -> Result<u64> {
    set.iter().try_fold(0u64, |acc, &i| {
        if i == 0 || i > 64 {
            return Err(Error::invalid(format!("set element {i} outside 1..=64")));
        }
        Ok(acc | 1u64 << (i - 1))
    })
}

pub fn mask_to_set(mask: u64) -> Vec<u32> {
    (1..=64).filter(|&i| mask >> (i - 1) & 1 == 1).collect()
}

/// `w_A` on the level-`level` cell `cell` (constant there once `max A ≤ level`).
fn sign_on_cell(mask: u64, cell: u64, level: u32) -> i8 {
    let mut parity = 0u32;
    let mut m = mask;
    while m != 0 {
        let i = m.trailing_zeros() + 1;
        parity ^= (cell >> (level - i) & 1) as u32;
        m &= m - 1;
    }
    1 - 2 * parity as i8
}

/// Coefficients `μ̂(A) = ∫w_A dμ` for every `A ⊂ {1, …, n_max}`, grouped by
/// `max A`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalshExpansion {
    pub n_max: u32,
    #[serde(with = "rational::serde_str")]
    pub empty: Rational,
    /// `groups[n − 1]` holds `{A : max A = n}`, indexed by the mask of `A ∖ {n}`.
    pub groups: Vec<Group>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Group {
    pub n: u32,
    #[serde(with = "rational::serde_str::vec")]
    pub values: Vec<Rational>,
}

impl WalshExpansion {
    /// Group `max A = n` (size `2^{n−1}`).
    pub fn group(&self, n: u32) -> Result<&[Rational]> {
        if n == 0 || n > self.n_max {
            return Err(Error::invalid(format!("group {n} outside 1..={}", self.n_max)));
        }
        Ok(&self.groups[n as usize - 1].values)
    }

    pub fn coefficient(&self, mask: u64) -> Result<Rational> {
        if mask == 0 {
            return Ok(self.empty.clone());
        }
        let n = 64 - mask.leading_zeros();
        let g = self.group(n)?;
        Ok(g[(mask & !(1u64 << (n - 1))) as usize].clone())
    }

    /// `Σ_{A⊂{1..n}} μ̂(A)²`.
    pub fn energy(&self, n: u32) -> Result<Rational> {
        let mut s = &self.empty * &self.empty;
        for k in 1..=n {
            s += self.group(k)?.iter().map(|x| x * x).sum::<Rational>();
        }
        Ok(s)
    }
}

/// In-place Walsh–Hadamard butterflies: `x[s] ← Σ_j x[j](−1)^{|j∧s|}`.
fn hadamard(x: &mut [Rational]) {
    let mut h = 1;
    while h < x.len() {
        for block in x.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let s = &*a + &*b;
                let d = &*a - &*b;
                *a = s;
                *b = d;
            }
        }
        h *= 2;
    }
}

fn reverse_bits(mask: u64, width: u32) -> u64 {
    if width == 0 {
        0
    } else {
        mask.reverse_bits() >> (64 - width)
    }
}

pub fn walsh_coeffs(mu: &DyadicMeasure, n_max: u32) -> Result<WalshExpansion> {
    if n_max > mu.resolution() {
        return Err(Error::invalid(format!(
            "n_max {n_max} exceeds the measure resolution {}",
            mu.resolution()
        )));
    }
    if n_max > MAX_WALSH_LEVEL {
        return Err(Error::invalid(format!("n_max is capped at {MAX_WALSH_LEVEL}")));
    }
    let mut x = vec![Rational::zero(); 1usize << n_max];
    for (cell, m) in mu.level_masses(n_max) {
        x[cell as usize] = m;
    }
    hadamard(&mut x);
    // cell digit d_i sits at bit n_max − i, so A's mask is bit-reversed
    let at = |mask: u64| x[reverse_bits(mask, n_max) as usize].clone();
    let groups = (1..=n_max)
        .map(|n| Group {
            n,
            values: (0..1u64 << (n - 1)).map(|rest| at(rest | 1u64 << (n - 1))).collect(),
        })
        .collect();
    let out = WalshExpansion {
        n_max,
        empty: at(0),
        groups,
    };
    debug_assert!(parseval_sides(&out, mu, n_max).map(|(a, b)| a == b).unwrap_or(false));
    Ok(out)
}

/// Both sides of `Σ_{A⊂{1..n}} μ̂(A)² = 2^n Σ_{ω∈F_n} m(ω)²`.
pub fn parseval_sides(e: &WalshExpansion, mu: &DyadicMeasure, n: u32) -> Result<(Rational, Rational)> {
    let lhs = e.energy(n)?;
    let rhs: Rational = mu.level_masses(n).values().map(|m| m * m).sum();
    Ok((lhs, rhs * rational::pow2(n as i64)))
}

/// `c(ω) = m(ω₀) − m(ω₁)` for `ω ∈ F_n`, position `j − 2^n` for `j ∈ [2^n, 2^{n+1})`.
pub fn haar_coeffs(mu: &DyadicMeasure, n: u32) -> Result<Vec<Rational>> {
    if n >= mu.resolution() {
        return Err(Error::invalid(format!(
            "Haar level {n} needs children, resolution is {}",
            mu.resolution()
        )));
    }
    if n > 30 {
        return Err(Error::invalid("Haar level capped at 30"));
    }
    let mut c = vec![Rational::zero(); 1usize << n];
    for (child, m) in mu.level_masses(n + 1) {
        let slot = &mut c[(child >> 1) as usize];
        if child & 1 == 0 {
            *slot += m;
        } else {
            *slot -= m;
        }
    }
    Ok(c)
}

/// Map from the Walsh group `max A = n+1` to the Haar group of level `n`.
/// Entries are `±2^{-n}`; `signs` is row-major with rows `ω ∈ F_n` and
/// columns the masks of `A ∖ {n+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalshHaarMatrix {
    pub level: u32,
    signs: Vec<i8>,
}

/// Sizes of the two groups the matrix connects. `quoted_walsh_group` is the
/// `2^{n+1}` count sometimes given for the Walsh group, kept for comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupSizes {
    pub level: u32,
    pub walsh_group: u64,
    pub haar_group: u64,
    pub quoted_walsh_group: u64,
}

pub fn group_sizes(level: u32) -> GroupSizes {
    GroupSizes {
        level,
        walsh_group: 1u64 << level,
        haar_group: 1u64 << level,
        quoted_walsh_group: 1u64 << (level + 1),
    }
}

impl WalshHaarMatrix {
    pub fn size(&self) -> usize {
        1usize << self.level
    }

    pub fn sign(&self, row: usize, col: usize) -> i8 {
        self.signs[row * self.size() + col]
    }

    pub fn entry(&self, row: usize, col: usize) -> Rational {
        rational::int(self.sign(row, col) as i64) * rational::pow2(-(self.level as i64))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.size() {
            return Err(Error::DimensionMismatch {
                expected: self.size(),
                actual: len,
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &[Rational]) -> Result<Vec<Rational>> {
        self.check_len(x.len())?;
        let n = self.size();
        // integer numerators over a common denominator, so rows sum without gcds
        let den = x.iter().fold(BigInt::one(), |d, v| d.lcm(v.denom()));
        let nums: Vec<BigInt> = x.iter().map(|v| v.numer() * (&den / v.denom())).collect();
        let den = den << self.level as usize;
        Ok((0..n)
            .map(|r| {
                let row = &self.signs[r * n..(r + 1) * n];
                let mut s = BigInt::zero();
                for (&sign, v) in row.iter().zip(&nums) {
                    if sign > 0 {
                        s += v;
                    } else {
                        s -= v;
                    }
                }
                Rational::new(s, den.clone())
            })
            .collect())
    }

    pub fn apply_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let n = self.size();
        let scale = (-(self.level as f64)).exp2();
        Ok((0..n)
            .map(|r| {
                let row = &self.signs[r * n..(r + 1) * n];
                row.iter().zip(x).map(|(&s, v)| s as f64 * v).sum::<f64>() * scale
            })
            .collect())
    }

    /// Largest absolute row sum and largest absolute column sum.
    pub fn abs_sums(&self) -> (Rational, Rational) {
        let n = self.size();
        let row_max = (0..n)
            .map(|r| (0..n).map(|c| self.entry(r, c).abs()).sum::<Rational>())
            .max()
            .unwrap_or_else(Rational::zero);
        let col_max = (0..n)
            .map(|c| (0..n).map(|r| self.entry(r, c).abs()).sum::<Rational>())
            .max()
            .unwrap_or_else(Rational::zero);
        (row_max, col_max)
    }
}

/// Builds the matrix by expanding each level-`n` Haar function in the Walsh
/// basis: `⟨h̃_ω, w_A⟩ = 2^{-n-1}(w_A(ω₀) − w_A(ω₁))`, and `c = Σ_A ⟨h̃_ω, w_A⟩ μ̂(A)`.
fn build_matrix(level: u32) -> WalshHaarMatrix {
    let n = 1usize << level;
    let top = 1u64 << level;
    let mut signs = vec![0i8; n * n];
    for row in 0..n {
        let left = (row as u64) << 1;
        for col in 0..n {
            let mask = col as u64 | top;
            let diff = sign_on_cell(mask, left, level + 1) - sign_on_cell(mask, left | 1, level + 1);
            signs[row * n + col] = diff / 2;
        }
    }
    WalshHaarMatrix { level, signs }
}

static MATRICES: [OnceLock<Arc<WalshHaarMatrix>>; MAX_MATRIX_LEVEL as usize + 1] =
    [const { OnceLock::new() }; MAX_MATRIX_LEVEL as usize + 1];

pub fn walsh_haar_matrix(level: u32) -> Result<Arc<WalshHaarMatrix>> {
    if level > MAX_MATRIX_LEVEL {
        return Err(Error::invalid(format!("matrix level capped at {MAX_MATRIX_LEVEL}")));
    }
    Ok(MATRICES[level as usize]
        .get_or_init(|| Arc::new(build_matrix(level)))
        .clone())
}

/// Sum of the `k` largest `|a_i|` (all of them when `k ≥ len`).
pub fn lorentz_norm(a: &[Rational], k: u64) -> Rational {
    let mut abs: Vec<Rational> = a.iter().map(|x| x.abs()).collect();
    abs.sort_unstable_by(|x, y| y.cmp(x));
    abs.into_iter().take(k.min(usize::MAX as u64) as usize).sum()
}

pub fn lorentz_norm_f64(a: &[f64], k: u64) -> f64 {
    let mut abs: Vec<f64> = a.iter().map(|x| x.abs()).collect();
    abs.sort_unstable_by(|x, y| y.total_cmp(x));
    abs.into_iter().take(k.min(usize::MAX as u64) as usize).sum()
}
