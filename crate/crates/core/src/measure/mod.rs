//! Signed atomic measures on the dyadic grid of the circle.

mod constructors;
mod liouville;
pub mod spec;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

pub use constructors::{
    alternating_pattern, make_cantor, make_dirac, make_riesz_sampled, make_sparse, make_uniform, random_class_member,
    square_cells, ChildMask,
};
pub use liouville::{liouville_intervals, make_liouville_truncation, Interval};

/// Largest grid exponent accepted by constructors.
pub const MAX_RESOLUTION: u32 = 40;

/// Measure whose atoms sit at the left endpoints `j·2^-K` of the grid cells.
///
/// Only nonzero weights are stored. `sampled` marks weights that came from
/// floating-point evaluation, so exact identities only hold approximately.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicMeasure {
    resolution: u32,
    atoms: BTreeMap<u64, Rational>,
    sampled: bool,
}

pub(crate) fn check_resolution(k: u32) -> Result<()> {
    if k > MAX_RESOLUTION {
        return Err(Error::ResolutionTooLarge {
            requested: k,
            max: MAX_RESOLUTION,
        });
    }
    Ok(())
}

impl DyadicMeasure {
    pub fn zero(resolution: u32) -> Result<Self> {
        check_resolution(resolution)?;
        Ok(DyadicMeasure {
            resolution,
            atoms: BTreeMap::new(),
            sampled: false,
        })
    }

    /// Builds a measure from `(cell, weight)` pairs. Repeated cells add up.
    pub fn from_atoms<I>(resolution: u32, atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, Rational)>,
    {
        let mut mu = Self::zero(resolution)?;
        let cells = mu.cell_count();
        for (cell, w) in atoms {
            if cell >= cells {
                return Err(Error::invalid(format!(
                    "cell {cell} outside grid of {cells} cells"
                )));
            }
            mu.add_atom(cell, w);
        }
        Ok(mu)
    }

    pub fn from_dense(resolution: u32, weights: Vec<Rational>) -> Result<Self> {
        check_resolution(resolution)?;
        if weights.len() as u64 != 1u64 << resolution {
            return Err(Error::DimensionMismatch {
                expected: 1usize << resolution,
                actual: weights.len(),
            });
        }
        Self::from_atoms(resolution, weights.into_iter().enumerate().map(|(j, w)| (j as u64, w)))
    }

    pub(crate) fn mark_sampled(mut self) -> Self {
        self.sampled = true;
        self
    }

    fn add_atom(&mut self, cell: u64, w: Rational) {
        if w.is_zero() {
            return;
        }
        let entry = self.atoms.entry(cell).or_insert_with(Rational::zero);
        *entry += w;
        if entry.is_zero() {
            self.atoms.remove(&cell);
        }
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn cell_count(&self) -> u64 {
        1u64 << self.resolution
    }

    pub fn is_sampled(&self) -> bool {
        self.sampled
    }

    /// Nonzero atoms keyed by cell index.
    pub fn atoms(&self) -> &BTreeMap<u64, Rational> {
        &self.atoms
    }

    pub fn weight(&self, cell: u64) -> Rational {
        self.atoms.get(&cell).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn dense_weights(&self) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.cell_count() as usize];
        for (&j, w) in &self.atoms {
            out[j as usize] = w.clone();
        }
        out
    }

    pub fn position(&self, cell: u64) -> Rational {
        Rational::new(BigInt::from(cell), rational::pow2_int(self.resolution))
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_variation(&self) -> Rational {
        self.atoms.values().map(|w| w.abs()).sum()
    }

    /// Signed total `μ(T)`.
    pub fn total_mass(&self) -> Rational {
        self.atoms.values().sum()
    }

    pub fn is_positive(&self) -> bool {
        self.atoms.values().all(|w| w.is_positive())
    }

    pub fn abs(&self) -> Self {
        self.map_weights(|w| w.abs())
    }

    pub fn negate(&self) -> Self {
        self.map_weights(|w| -w)
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        if factor.is_zero() {
            return DyadicMeasure {
                atoms: BTreeMap::new(),
                ..self.clone()
            };
        }
        self.map_weights(|w| w * factor)
    }

    fn map_weights(&self, f: impl Fn(&Rational) -> Rational) -> Self {
        DyadicMeasure {
            resolution: self.resolution,
            atoms: self.atoms.iter().map(|(&j, w)| (j, f(w))).collect(),
            sampled: self.sampled,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let (a, b) = self.aligned(other)?;
        let mut out = a.into_owned();
        for (&j, w) in &b.atoms {
            out.add_atom(j, w.clone());
        }
        out.sampled |= b.sampled;
        Ok(out)
    }

    /// Sums weights within each cell of the coarser grid `2^-k`.
    pub fn coarsen(&self, k: u32) -> Result<Self> {
        if k > self.resolution {
            return Err(Error::invalid(format!(
                "cannot coarsen resolution {} to finer resolution {k}",
                self.resolution
            )));
        }
        let shift = self.resolution - k;
        let mut out = Self::zero(k)?;
        out.sampled = self.sampled;
        for (&j, w) in &self.atoms {
            out.add_atom(j >> shift, w.clone());
        }
        Ok(out)
    }

    /// Zeroes every cell for which `keep` is false.
    pub fn restrict(&self, keep: impl Fn(u64) -> bool) -> Self {
        DyadicMeasure {
            resolution: self.resolution,
            atoms: self
                .atoms
                .iter()
                .filter(|(&j, _)| keep(j))
                .map(|(&j, w)| (j, w.clone()))
                .collect(),
            sampled: self.sampled,
        }
    }

    /// Restriction to a union of cells of the coarser level `level`.
    pub fn restrict_to_cells(&self, level: u32, cells: &std::collections::BTreeSet<u64>) -> Self {
        let shift = self.resolution.saturating_sub(level);
        self.restrict(|j| cells.contains(&(j >> shift)))
    }

    /// `(positive part, negative part)` with `μ = p − n`.
    pub fn jordan_split(&self) -> (Self, Self) {
        let pos = self.restrict(|j| self.atoms[&j].is_positive());
        let neg = self.restrict(|j| self.atoms[&j].is_negative()).negate();
        (pos, neg)
    }

    /// Reflection of cells `j ↦ 2^K − 1 − j`; swaps left and right children
    /// at every level of the dyadic tree.
    pub fn mirror_cells(&self) -> Self {
        let last = self.cell_count() - 1;
        DyadicMeasure {
            resolution: self.resolution,
            atoms: self.atoms.iter().map(|(&j, w)| (last - j, w.clone())).collect(),
            sampled: self.sampled,
        }
    }

    /// Reflection of atoms `x ↦ −x` on the circle.
    pub fn reflect(&self) -> Self {
        let n = self.cell_count();
        DyadicMeasure {
            resolution: self.resolution,
            atoms: self.atoms.iter().map(|(&j, w)| ((n - j) % n, w.clone())).collect(),
            sampled: self.sampled,
        }
    }

    /// Brings two measures to a common resolution by coarsening the finer one.
    pub fn aligned<'a>(
        &'a self,
        other: &'a Self,
    ) -> Result<(std::borrow::Cow<'a, Self>, std::borrow::Cow<'a, Self>)> {
        use std::borrow::Cow;
        Ok(match self.resolution.cmp(&other.resolution) {
            std::cmp::Ordering::Equal => (Cow::Borrowed(self), Cow::Borrowed(other)),
            std::cmp::Ordering::Greater => (
                Cow::Owned(self.coarsen(other.resolution)?),
                Cow::Borrowed(other),
            ),
            std::cmp::Ordering::Less => (
                Cow::Borrowed(self),
                Cow::Owned(other.coarsen(self.resolution)?),
            ),
        })
    }

    /// Weights written as integers over one common denominator.
    fn integer_form(&self) -> (BigInt, Vec<(u64, BigInt)>) {
        let den = self
            .atoms
            .values()
            .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
        let nums = self
            .atoms
            .iter()
            .map(|(&j, w)| (j, w.numer() * (&den / w.denom())))
            .collect();
        (den, nums)
    }

    /// Circular convolution. The finer operand is coarsened first.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        let (a, b) = self.aligned(other)?;
        let mask = a.cell_count() - 1;
        let (da, na) = a.integer_form();
        let (db, nb) = b.integer_form();
        let mut acc: BTreeMap<u64, BigInt> = BTreeMap::new();
        for (i, x) in &na {
            for (j, y) in &nb {
                *acc.entry((i + j) & mask).or_insert_with(BigInt::zero) += x * y;
            }
        }
        let den = da * db;
        let mut out = Self::zero(a.resolution)?;
        out.sampled = a.sampled || b.sampled;
        for (j, num) in acc {
            out.add_atom(j, Rational::new(num, den.clone()));
        }
        Ok(out)
    }

    /// `μ^{∗m}`, with `μ^{∗0} = δ_0`.
    pub fn convolve_power(&self, m: u32) -> Result<Self> {
        let mut out = make_dirac(&Rational::zero(), self.resolution)?;
        out.sampled = self.sampled;
        for _ in 0..m {
            out = out.convolve(self)?;
        }
        Ok(out)
    }

    /// Signed masses `μ(ω)` of the level-`n` cells, nonzero entries only.
    pub fn level_masses(&self, n: u32) -> BTreeMap<u64, Rational> {
        let shift = self.resolution.saturating_sub(n);
        let mut out: BTreeMap<u64, Rational> = BTreeMap::new();
        for (&j, w) in &self.atoms {
            *out.entry(j >> shift).or_insert_with(Rational::zero) += w;
        }
        out.retain(|_, w| !w.is_zero());
        out
    }

    /// `|μ|(ω)` for the level-`n` cells, nonzero entries only.
    pub fn level_variation(&self, n: u32) -> BTreeMap<u64, Rational> {
        self.abs().level_masses(n)
    }

    /// Atoms as `(position, weight)` floats.
    pub fn to_f64_atoms(&self) -> Vec<(f64, f64)> {
        let scale = (-(self.resolution as f64)).exp2();
        self.atoms
            .iter()
            .map(|(&j, w)| (j as f64 * scale, rational::to_f64(w)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    fn m(resolution: u32, w: &[(u64, Rational)]) -> DyadicMeasure {
        DyadicMeasure::from_atoms(resolution, w.iter().cloned()).unwrap()
    }

    #[test]
    fn jordan_split_of_two_atoms() {
        let mu = m(1, &[(0, int(1)), (1, int(-2))]);
        let (p, n) = mu.jordan_split();
        assert_eq!(p.dense_weights(), vec![int(1), int(0)]);
        assert_eq!(n.dense_weights(), vec![int(0), int(2)]);
        assert_eq!(mu.total_variation(), p.total_variation() + n.total_variation());
    }

    #[test]
    fn coarsen_uniform() {
        let u4 = make_uniform(4).unwrap();
        assert_eq!(u4.coarsen(2).unwrap(), make_uniform(2).unwrap());
        assert!(u4.coarsen(5).is_err());
    }

    #[test]
    fn restrict_all_is_identity() {
        let mu = m(2, &[(0, frac(1, 2)), (3, frac(-1, 3))]);
        assert_eq!(mu.restrict(|_| true), mu);
    }

    #[test]
    fn dirac_convolutions() {
        let a = make_dirac(&frac(3, 4), 3).unwrap();
        let b = make_dirac(&frac(1, 2), 3).unwrap();
        assert_eq!(a.convolve(&b).unwrap(), make_dirac(&frac(1, 4), 3).unwrap());
        let mu = m(3, &[(1, frac(1, 3)), (6, frac(2, 3))]);
        let d0 = make_dirac(&int(0), 3).unwrap();
        assert_eq!(d0.convolve(&mu).unwrap(), mu);
        let u = make_uniform(3).unwrap();
        assert_eq!(u.convolve(&a).unwrap(), u);
    }

    #[test]
    fn convolution_coarsens_finer_operand() {
        let fine = make_dirac(&frac(3, 8), 3).unwrap();
        let coarse = make_dirac(&frac(1, 2), 1).unwrap();
        let c = fine.convolve(&coarse).unwrap();
        assert_eq!(c.resolution(), 1);
        // 3/8 falls in the first half-cell
        assert_eq!(c, make_dirac(&frac(1, 2), 1).unwrap());
    }

    #[test]
    fn level_masses_sum_children() {
        let mu = m(2, &[(0, frac(1, 2)), (1, frac(1, 4)), (2, frac(1, 4))]);
        let l1 = mu.level_masses(1);
        assert_eq!(l1[&0], frac(3, 4));
        assert_eq!(l1[&1], frac(1, 4));
    }

    #[test]
    fn mirror_and_reflect() {
        let mu = m(2, &[(1, int(1))]);
        assert_eq!(mu.mirror_cells().atoms().keys().copied().collect::<Vec<_>>(), vec![2]);
        assert_eq!(mu.reflect().atoms().keys().copied().collect::<Vec<_>>(), vec![3]);
        assert_eq!(make_dirac(&int(0), 2).unwrap().reflect(), make_dirac(&int(0), 2).unwrap());
    }

    #[test]
    fn out_of_grid_cells_rejected() {
        assert!(DyadicMeasure::from_atoms(2, [(4, int(1))]).is_err());
        assert!(DyadicMeasure::zero(MAX_RESOLUTION + 1).is_err());
    }
}
