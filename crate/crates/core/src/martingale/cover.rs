use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::Serialize;

use super::cbeta::{c_beta_estimate, cell_cap};
use crate::error::{Error, Result};
use crate::measure::DyadicMeasure;
use crate::rational::{self, int, Rational};

#[derive(Clone, Debug, Default)]
pub struct CoverOptions {
    /// Margin `δ` per scale `k`; scales not listed use one cell `2^-k`.
    pub margins: BTreeMap<u32, Rational>,
    /// Reference value of `c_β(ν₁)`; defaults to the estimate at the finest
    /// resolution of `ν₁`.
    pub c_beta: Option<Rational>,
    /// Coarsest scale to try.
    pub min_level: u32,
    /// Finest scale to try; defaults to the resolution of `ν₁`.
    pub max_level: Option<u32>,
}

/// Equal-length dyadic cells of `ν₁`-mass whose `δ`-neighbourhoods carry
/// little `ν₂`-mass.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverFamily {
    pub level: u32,
    #[serde(with = "rational::serde_str")]
    pub cell_length: Rational,
    pub cells: Vec<u64>,
    #[serde(with = "rational::serde_str")]
    pub margin: Rational,
    #[serde(with = "rational::serde_str")]
    pub tau: Rational,
    #[serde(with = "rational::serde_str")]
    pub beta: Rational,
    pub cap: u64,
    /// `#D · d^β`, a float because `d^β` is irrational in general.
    pub size_weight: f64,
    #[serde(with = "rational::serde_str")]
    pub c_beta: Rational,
    /// `Σ_D ν₁(ω)`.
    #[serde(with = "rational::serde_str")]
    pub nu1_mass: Rational,
    /// `½ c_β(ν₁) − τ`.
    #[serde(with = "rational::serde_str")]
    pub half_target: Rational,
    /// `c_β(ν₁) − τ`, the unhalved variant.
    #[serde(with = "rational::serde_str")]
    pub full_target: Rational,
    pub meets_full_target: bool,
    /// `ν₂(⋃_D ω + [−δ, δ])`.
    #[serde(with = "rational::serde_str")]
    pub nu2_margin_mass: Rational,
}

/// What went wrong at one scale.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleAttempt {
    pub level: u32,
    pub cells_taken: usize,
    pub cap: u64,
    #[serde(with = "rational::serde_str")]
    pub nu1_mass: Rational,
    #[serde(with = "rational::serde_str")]
    pub target: Rational,
    pub skipped_for_margin: usize,
    /// `size`, `mass` or `margin`.
    pub binding: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverFailure {
    pub attempts: Vec<ScaleAttempt>,
}

impl fmt::Display for CoverFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no scale satisfies all conditions;")?;
        for a in &self.attempts {
            write!(
                f,
                " k={}: {} (took {}/{} cells, mass {:.6} vs {:.6})",
                a.level,
                a.binding,
                a.cells_taken,
                a.cap,
                rational::to_f64(&a.nu1_mass),
                rational::to_f64(&a.target)
            )?;
        }
        Ok(())
    }
}

/// Running `ν₂`-mass of a union of closed arcs, counted once per atom.
struct MarginTracker<'a> {
    nu2: &'a DyadicMeasure,
    grid: BigInt,
    counted: BTreeSet<u64>,
    mass: Rational,
}

impl<'a> MarginTracker<'a> {
    fn new(nu2: &'a DyadicMeasure) -> Self {
        MarginTracker {
            nu2,
            grid: rational::pow2_int(nu2.resolution()),
            counted: BTreeSet::new(),
            mass: Rational::zero(),
        }
    }

    /// Atoms of `ν₂` in the closed arc `[lo, hi]` (taken mod 1), not yet counted.
    fn atoms_in(&self, lo: &Rational, hi: &Rational) -> Vec<(u64, Rational)> {
        let n = self.nu2.cell_count() as i128;
        if hi - lo >= int(1) - Rational::new(1.into(), self.grid.clone()) {
            return self
                .nu2
                .atoms()
                .iter()
                .filter(|(j, _)| !self.counted.contains(j))
                .map(|(&j, w)| (j, w.clone()))
                .collect();
        }
        let scale = Rational::from_integer(self.grid.clone());
        let first: i128 = rational::ceil(&(lo * &scale)).try_into().expect("grid index");
        let end: i128 = rational::floor(&(hi * &scale)).try_into().expect("grid index");
        let end = end + 1;
        let mut ranges = Vec::new();
        let (a, b) = (first.rem_euclid(n), first.rem_euclid(n) + (end - first));
        if b <= n {
            ranges.push((a as u64, b as u64));
        } else {
            ranges.push((a as u64, n as u64));
            ranges.push((0, (b - n) as u64));
        }
        ranges
            .into_iter()
            .flat_map(|(a, b)| self.nu2.atoms().range(a..b))
            .filter(|(j, _)| !self.counted.contains(j))
            .map(|(&j, w)| (j, w.clone()))
            .collect()
    }

    fn extra(&self, lo: &Rational, hi: &Rational) -> (Rational, Vec<u64>) {
        let atoms = self.atoms_in(lo, hi);
        let mass = atoms.iter().map(|(_, w)| w.abs()).sum();
        (mass, atoms.into_iter().map(|(j, _)| j).collect())
    }

    fn commit(&mut self, mass: Rational, atoms: Vec<u64>) {
        self.mass += mass;
        self.counted.extend(atoms);
    }
}

fn default_margin(k: u32) -> Rational {
    rational::pow2(-(k as i64))
}

fn check_disjoint(nu1: &DyadicMeasure, nu2: &DyadicMeasure) -> Result<()> {
    let fine = nu1.resolution().max(nu2.resolution());
    let lift = |mu: &DyadicMeasure| -> BTreeSet<u64> {
        mu.atoms().keys().map(|j| j << (fine - mu.resolution())).collect()
    };
    let a = lift(nu1);
    if lift(nu2).iter().any(|j| a.contains(j)) {
        return Err(Error::invalid(
            "cover needs mutually singular measures, but nu1 and nu2 share atoms",
        ));
    }
    Ok(())
}

/// Searches scales from fine to coarse for a family `D` of at most
/// `⌊2^{βk}⌋` cells with `Σ_D ν₁ > ½c_β(ν₁) − τ` and
/// `ν₂(⋃ ω + [−δ, δ]) < τ`, taking the heaviest admissible cells first.
pub fn select_cover(
    nu1: &DyadicMeasure,
    nu2: &DyadicMeasure,
    beta: &Rational,
    tau: &Rational,
    options: &CoverOptions,
) -> Result<CoverFamily> {
    if !nu1.is_positive() || !nu2.is_positive() {
        return Err(Error::invalid("cover needs positive measures"));
    }
    if nu1.is_zero() {
        return Err(Error::NoMass("nu1 is zero".into()));
    }
    if *beta < Rational::zero() || *beta >= int(1) {
        return Err(Error::invalid("beta must lie in [0, 1)"));
    }
    if !tau.is_positive() {
        return Err(Error::invalid("tau must be positive"));
    }
    check_disjoint(nu1, nu2)?;
    let c_beta = match &options.c_beta {
        Some(c) => c.clone(),
        None => c_beta_estimate(nu1, beta, nu1.resolution())?.value,
    };
    let half_target = &c_beta / int(2) - tau;
    let full_target = &c_beta - tau;
    let finest = options.max_level.unwrap_or(nu1.resolution()).min(nu1.resolution());
    let mut attempts = Vec::new();
    for k in (options.min_level..=finest).rev() {
        let cap = cell_cap(beta, k);
        let d = rational::pow2(-(k as i64));
        let delta = options.margins.get(&k).cloned().unwrap_or_else(|| default_margin(k));
        let mut candidates: Vec<(u64, Rational)> = nu1.level_masses(k).into_iter().collect();
        candidates.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut tracker = MarginTracker::new(nu2);
        let mut chosen: BTreeMap<u64, Rational> = BTreeMap::new();
        let mut skipped = 0usize;
        for (cell, mass) in candidates {
            if chosen.len() as u64 >= cap {
                break;
            }
            let b = Rational::from_integer(cell.into()) * &d;
            let lo = &b - &delta;
            let hi = &b + &d + &delta;
            let (extra, atoms) = tracker.extra(&lo, &hi);
            if &tracker.mass + &extra < *tau {
                tracker.commit(extra, atoms);
                chosen.insert(cell, mass);
            } else {
                skipped += 1;
            }
        }
        let nu1_mass: Rational = chosen.values().sum();
        if nu1_mass > half_target && !chosen.is_empty() {
            let mut cells: Vec<(u64, Rational)> = chosen.into_iter().collect();
            cells.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let count = cells.len();
            return Ok(CoverFamily {
                level: k,
                size_weight: count as f64 * (-(k as f64) * rational::to_f64(beta)).exp2(),
                cell_length: d,
                cells: cells.into_iter().map(|(c, _)| c).collect(),
                margin: delta,
                tau: tau.clone(),
                beta: beta.clone(),
                cap,
                meets_full_target: nu1_mass > full_target,
                c_beta,
                nu1_mass,
                half_target,
                full_target,
                nu2_margin_mass: tracker.mass,
            });
        }
        let binding = if skipped > 0 {
            "margin"
        } else if chosen.len() as u64 >= cap {
            "size"
        } else {
            "mass"
        };
        attempts.push(ScaleAttempt {
            level: k,
            cells_taken: chosen.len(),
            cap,
            nu1_mass,
            target: half_target.clone(),
            skipped_for_margin: skipped,
            binding,
        });
    }
    Err(Error::Cover(CoverFailure { attempts }))
}

impl CoverFamily {
    /// Recomputes `ν₂(⋃ ω + [−δ, δ])` from scratch with closed neighbourhoods.
    pub fn recheck_margin(&self, nu2: &DyadicMeasure) -> Rational {
        let one = int(1);
        nu2.atoms()
            .iter()
            .filter(|(&j, _)| {
                let x = nu2.position(j);
                self.cells.iter().any(|&c| {
                    let b = Rational::from_integer(c.into()) * &self.cell_length;
                    let lo = &b - &self.margin;
                    let hi = &b + &self.cell_length + &self.margin;
                    // compare on the circle: shift x by ±1 as needed
                    [x.clone() - &one, x.clone(), x.clone() + &one]
                        .iter()
                        .any(|y| *y >= lo && *y <= hi)
                })
            })
            .map(|(_, w)| w.abs())
            .sum()
    }

    pub fn recheck_nu1(&self, nu1: &DyadicMeasure) -> Rational {
        let masses = nu1.level_masses(self.level);
        self.cells
            .iter()
            .map(|c| masses.get(c).cloned().unwrap_or_else(Rational::zero))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{alternating_pattern, make_cantor, make_dirac, make_uniform};
    use crate::rational::frac;

    #[test]
    fn two_diracs() {
        let nu1 = make_dirac(&int(0), 6).unwrap();
        let nu2 = make_dirac(&frac(1, 2), 6).unwrap();
        let fam = select_cover(&nu1, &nu2, &int(0), &frac(1, 10), &CoverOptions::default()).unwrap();
        assert_eq!(fam.cells, vec![0]);
        assert_eq!(fam.level, 6);
        assert!(fam.nu2_margin_mass.is_zero());
        assert!(fam.nu1_mass > fam.half_target);
    }

    #[test]
    fn cantor_left_uniform_right() {
        // Cantor measure squeezed into [0, 1/2) against uniform on [1/2, 1).
        let c = make_cantor(&alternating_pattern(), 9).unwrap();
        let nu1 = DyadicMeasure::from_atoms(10, c.atoms().iter().map(|(&j, w)| (j, w.clone()))).unwrap();
        let u = make_uniform(9).unwrap();
        let nu2 = DyadicMeasure::from_atoms(10, u.atoms().iter().map(|(&j, w)| (j + 512, w.clone()))).unwrap();
        let tau = frac(1, 20);
        let fam = select_cover(&nu1, &nu2, &frac(3, 5), &tau, &CoverOptions::default()).unwrap();
        let margin = fam.recheck_margin(&nu2);
        assert!(margin < tau);
        assert_eq!(fam.recheck_nu1(&nu1), fam.nu1_mass);
        assert!(fam.cells.len() as u64 <= fam.cap);
    }

    #[test]
    fn identical_measures_rejected() {
        let nu = make_dirac(&int(0), 4).unwrap();
        assert!(select_cover(&nu, &nu, &int(0), &frac(1, 10), &CoverOptions::default()).is_err());
    }

    #[test]
    fn failure_lists_every_scale() {
        // ν₂ sits right next to the only ν₁ atom at every scale.
        let nu1 = make_dirac(&int(0), 3).unwrap();
        let nu2 = make_dirac(&frac(1, 8), 3).unwrap();
        let err = select_cover(&nu1, &nu2, &int(0), &frac(1, 10), &CoverOptions::default()).unwrap_err();
        match err {
            Error::Cover(f) => {
                assert_eq!(f.attempts.len(), 4);
                assert!(f.attempts.iter().all(|a| a.binding == "margin"));
            }
            other => panic!("unexpected {other}"),
        }
    }
}
