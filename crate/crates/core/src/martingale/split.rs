use std::collections::BTreeSet;

use num_traits::{Signed, Zero};
use serde::Serialize;

use super::cbeta::c_beta_estimate;
use crate::error::{Error, Result};
use crate::measure::DyadicMeasure;
use crate::rational::{self, int, Rational};

/// `μ_p` (positive, on the carrier) and `μ_r = |μ|` off the carrier.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureSplit {
    #[serde(skip)]
    pub positive_part: DyadicMeasure,
    #[serde(skip)]
    pub remainder: DyadicMeasure,
    /// Grid cells (at the measure resolution) of the carrier.
    pub carrier: BTreeSet<u64>,
    /// Level at which the `c_β`-optimal cells were chosen.
    pub level: u32,
    #[serde(with = "rational::serde_str")]
    pub eta: Rational,
    #[serde(with = "rational::serde_str")]
    pub c_beta: Rational,
    /// True when `μ` was replaced by `−μ` because the optimal cells carry
    /// more negative than positive mass.
    pub negated: bool,
    #[serde(with = "rational::serde_str")]
    pub positive_mass: Rational,
    #[serde(with = "rational::serde_str")]
    pub remainder_mass: Rational,
}

impl MeasureSplit {
    /// `μ_p ≥ 0`, `supp μ_p ⊂ carrier`, `μ_r = |μ|` off the carrier, and
    /// `μ_p(carrier) > ½c_β − η`.
    pub fn invariant_holds(&self, mu: &DyadicMeasure) -> bool {
        let signed = if self.negated { mu.negate() } else { mu.clone() };
        let positive = self.positive_part.is_positive()
            && self.positive_part.atoms().keys().all(|c| self.carrier.contains(c));
        let remainder_ok = self.remainder == signed.abs().restrict(|c| !self.carrier.contains(&c));
        let agrees = self
            .positive_part
            .atoms()
            .iter()
            .all(|(c, w)| signed.weight(*c) == *w);
        let mass_ok = self.positive_part.total_mass() > &self.c_beta / int(2) - &self.eta;
        positive && remainder_ok && agrees && mass_ok
    }
}

pub fn isolate_positive_part(mu: &DyadicMeasure, beta: &Rational, eta: &Rational) -> Result<MeasureSplit> {
    isolate_positive_part_at(mu, beta, eta, mu.resolution())
}

/// Picks the `⌊2^{βk}⌋` heaviest level-`k` cells of `|μ|`, orients `μ` so
/// that those cells carry at least as much positive as negative mass, and
/// keeps the positive atoms inside them as the carrier.
pub fn isolate_positive_part_at(
    mu: &DyadicMeasure,
    beta: &Rational,
    eta: &Rational,
    k: u32,
) -> Result<MeasureSplit> {
    if !eta.is_positive() {
        return Err(Error::invalid("eta must be positive"));
    }
    let est = c_beta_estimate(mu, beta, k)?;
    if est.value.is_zero() {
        return Err(Error::NoMass("c_beta estimate is 0; nothing to isolate".into()));
    }
    let top: BTreeSet<u64> = est.cells.iter().copied().collect();
    let shift = mu.resolution() - k;
    let inside = mu.restrict(|c| top.contains(&(c >> shift)));
    let (pos, neg) = inside.jordan_split();
    let negated = neg.total_mass() > pos.total_mass();
    let signed = if negated { mu.negate() } else { mu.clone() };
    let carrier: BTreeSet<u64> = signed
        .atoms()
        .iter()
        .filter(|(c, w)| w.is_positive() && top.contains(&(**c >> shift)))
        .map(|(&c, _)| c)
        .collect();
    let positive_part = signed.restrict(|c| carrier.contains(&c));
    let remainder = signed.abs().restrict(|c| !carrier.contains(&c));
    Ok(MeasureSplit {
        positive_mass: positive_part.total_mass(),
        remainder_mass: remainder.total_mass(),
        positive_part,
        remainder,
        carrier,
        level: k,
        eta: eta.clone(),
        c_beta: est.value,
        negated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::make_uniform;
    use crate::rational::frac;

    #[test]
    fn signed_two_atoms() {
        let mu = DyadicMeasure::from_dense(1, vec![int(1), int(-1)]).unwrap();
        let s = isolate_positive_part(&mu, &int(0), &frac(1, 100)).unwrap();
        assert_eq!(s.carrier, BTreeSet::from([0]));
        assert_eq!(s.positive_mass, int(1));
        assert_eq!(s.remainder_mass, int(1));
        assert!(!s.negated);
        assert!(s.invariant_holds(&mu));
    }

    #[test]
    fn negative_heavy_measure_is_flipped() {
        let mu = DyadicMeasure::from_dense(2, vec![frac(1, 4), frac(-1, 2), int(0), frac(1, 8)]).unwrap();
        let s = isolate_positive_part(&mu, &int(0), &frac(1, 100)).unwrap();
        assert!(s.negated);
        assert_eq!(s.carrier, BTreeSet::from([1]));
        assert!(s.invariant_holds(&mu));
    }

    #[test]
    fn positive_measure_top_cells() {
        let mu = make_uniform(6).unwrap();
        let s = isolate_positive_part(&mu, &frac(1, 2), &frac(1, 100)).unwrap();
        assert_eq!(s.carrier.len(), 8);
        assert!(s.invariant_holds(&mu));
    }

    #[test]
    fn zero_measure_errors() {
        let mu = DyadicMeasure::zero(4).unwrap();
        assert!(isolate_positive_part(&mu, &frac(1, 2), &frac(1, 10)).is_err());
    }
}
