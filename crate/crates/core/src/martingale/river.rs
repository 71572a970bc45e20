use std::fmt;

use num_traits::{Signed, Zero};
use serde::Serialize;

use super::{build_tree, check_class_membership, classify, s_r_counts, MartingaleTree, SplitThreshold};
use crate::error::{Error, Result};
use crate::measure::DyadicMeasure;
use crate::rational::{self, int, Rational};

/// `(β, α, ρ)` with `β ∈ [0,1)`, `α ∈ (−1,0)`, `ρ ∈ (0,1)` and `αρ + β < 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RiverParams {
    #[serde(with = "rational::serde_str")]
    pub beta: Rational,
    #[serde(with = "rational::serde_str")]
    pub alpha: Rational,
    #[serde(with = "rational::serde_str")]
    pub rho: Rational,
}

impl RiverParams {
    pub fn new(beta: Rational, alpha: Rational, rho: Rational) -> Result<Self> {
        let zero = Rational::zero();
        let one = int(1);
        if beta < zero || beta >= one {
            return Err(Error::invalid("beta must lie in [0, 1)"));
        }
        if alpha <= -one.clone() || alpha >= zero {
            return Err(Error::invalid("alpha must lie in (-1, 0)"));
        }
        if rho <= zero || rho >= one {
            return Err(Error::invalid("rho must lie in (0, 1)"));
        }
        if &alpha * &rho + &beta >= zero {
            return Err(Error::invalid(format!(
                "need alpha*rho + beta < 0, got {}",
                rational::to_f64(&(&alpha * &rho + &beta))
            )));
        }
        Ok(RiverParams { beta, alpha, rho })
    }

    pub fn threshold(&self) -> SplitThreshold {
        SplitThreshold::Exponent(self.alpha.clone())
    }

    /// `1 − β/(|α|ρ)`, the limiting window fraction.
    pub fn theta_limit(&self) -> Rational {
        int(1) - &self.beta / (-&self.alpha * &self.rho)
    }
}

/// Start of the averaging window `(r, k−1]` for level `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RiverWindow {
    pub k: u32,
    /// Midpoint of `ρ` and `max(−β/α, 0)`.
    #[serde(with = "rational::serde_str")]
    pub rho_prime: Rational,
    /// `k(αρ′+β)/(αρ′)` before rounding.
    #[serde(with = "rational::serde_str")]
    pub r_exact: Rational,
    pub r: u32,
    /// True when rounding up would leave an empty window and `r` was capped
    /// at `k − 2`.
    pub capped: bool,
    #[serde(with = "rational::serde_str")]
    pub theta: Rational,
}

pub fn river_window(params: &RiverParams, k: u32) -> Result<RiverWindow> {
    if k < 2 {
        return Err(Error::invalid("mountain river search needs k >= 2"));
    }
    let crit = (-&params.beta / &params.alpha).max(Rational::zero());
    let rho_prime = (&params.rho + crit) / int(2);
    let ar = &params.alpha * &rho_prime;
    let r_exact = Rational::from_integer(k.into()) * (&ar + &params.beta) / &ar;
    let up: i64 = rational::ceil(&r_exact).try_into().unwrap_or(i64::MAX);
    let up = up.max(0);
    let capped = up > k as i64 - 2;
    let r = if capped { k - 2 } else { up as u32 };
    Ok(RiverWindow {
        k,
        theta: Rational::new(r.into(), k.into()),
        rho_prime,
        r_exact,
        r,
        capped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelMass {
    pub level: u32,
    #[serde(with = "rational::serde_str")]
    pub mass: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RiverOutcome {
    pub n: u32,
    pub window: RiverWindow,
    #[serde(with = "rational::serde_str")]
    pub theta: Rational,
    #[serde(with = "rational::serde_str")]
    pub turbulent_mass: Rational,
    #[serde(with = "rational::serde_str")]
    pub total_mass: Rational,
    /// `ρ‖μ‖`.
    #[serde(with = "rational::serde_str")]
    pub budget: Rational,
    pub turbulent_mass_by_level: Vec<LevelMass>,
    /// Both sides of the turbulent-mass / ancestor-count identity on the
    /// window `(r, k−1]`.
    #[serde(with = "rational::serde_str")]
    pub identity_lhs: Rational,
    #[serde(with = "rational::serde_str")]
    pub identity_rhs: Rational,
    pub identity_holds: bool,
    pub cell_count: u64,
    pub cell_cap: u64,
}

/// No level of the window had small enough turbulent mass.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RiverFailure {
    pub k: u32,
    pub r: u32,
    #[serde(with = "rational::serde_str")]
    pub budget: Rational,
    pub turbulent_mass_by_level: Vec<LevelMass>,
}

impl fmt::Display for RiverFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no level in ({}, {}] has turbulent mass below {:.6}; per level:",
            self.r,
            self.k - 1,
            rational::to_f64(&self.budget)
        )?;
        for lm in &self.turbulent_mass_by_level {
            write!(f, " {}:{:.6}", lm.level, rational::to_f64(&lm.mass))?;
        }
        Ok(())
    }
}

pub(crate) fn turbulent_masses(
    tree: &MartingaleTree,
    threshold: &SplitThreshold,
    levels: std::ops::Range<u32>,
) -> Result<Vec<LevelMass>> {
    levels
        .map(|n| {
            Ok(LevelMass {
                level: n,
                mass: classify(tree, n, threshold)?.turbulent_mass(tree),
            })
        })
        .collect()
}

/// Smallest level `n ∈ (r, k−1]` whose turbulent vertices carry less than
/// `ρ‖μ‖`.
pub fn mountain_river_search(mu: &DyadicMeasure, params: &RiverParams, k: u32) -> Result<RiverOutcome> {
    if mu.is_zero() || !mu.is_positive() {
        return Err(Error::invalid("mountain river search needs a nonzero positive measure"));
    }
    if k > mu.resolution() {
        return Err(Error::invalid(format!(
            "level {k} is finer than the measure resolution {}",
            mu.resolution()
        )));
    }
    let window = river_window(params, k)?;
    let membership = check_class_membership(mu, &params.beta, k)?;
    if !membership.member {
        return Err(Error::invalid(format!(
            "measure is not in M(beta, k): {} nonzero cells at level {k}, cap {}",
            membership.count, membership.cap
        )));
    }
    let tree = build_tree(mu);
    let threshold = params.threshold();
    let total = tree.root_mass().abs();
    let budget = &params.rho * &total;
    let by_level = turbulent_masses(&tree, &threshold, 0..k)?;
    let found = by_level
        .iter()
        .find(|lm| lm.level > window.r && lm.mass < budget)
        .map(|lm| (lm.level, lm.mass.clone()));
    let Some((n, turbulent_mass)) = found else {
        return Err(Error::River(RiverFailure {
            k,
            r: window.r,
            budget,
            turbulent_mass_by_level: by_level,
        }));
    };
    let counts = s_r_counts(&tree, &threshold, window.r, k)?;
    Ok(RiverOutcome {
        n,
        theta: window.theta.clone(),
        window,
        turbulent_mass,
        total_mass: total,
        budget,
        turbulent_mass_by_level: by_level,
        identity_holds: counts.identity_holds(),
        identity_lhs: counts.window_turbulent_mass,
        identity_rhs: counts.weighted_counts,
        cell_count: membership.count,
        cell_cap: membership.cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{make_dirac, make_sparse, make_uniform};
    use crate::rational::frac;

    fn params(beta: Rational, alpha: Rational, rho: Rational) -> RiverParams {
        RiverParams::new(beta, alpha, rho).unwrap()
    }

    #[test]
    fn dirac_returns_first_window_level() {
        let d = make_dirac(&int(0), 12).unwrap();
        let p = params(int(0), frac(-1, 2), frac(1, 2));
        let out = mountain_river_search(&d, &p, 12).unwrap();
        assert_eq!(out.n, out.window.r + 1);
        assert!(out.turbulent_mass.is_zero());
        assert!(out.window.capped);
        assert!(out.identity_holds);
    }

    #[test]
    fn sparse_initial_segment() {
        let k = 20;
        let beta = frac(1, 2);
        let cells = (0..1u64 << 10).collect();
        let mu = make_sparse(&cells, k).unwrap();
        let p = params(beta, frac(-3, 4), frac(3, 4));
        let out = mountain_river_search(&mu, &p, k).unwrap();
        assert!(out.n <= 10, "n = {}", out.n);
        // the search picks the first level of the window below budget
        for lm in &out.turbulent_mass_by_level {
            if lm.level > out.window.r && lm.level < out.n {
                assert!(lm.mass >= out.budget);
            }
        }
    }

    #[test]
    fn guards() {
        assert!(RiverParams::new(int(1), frac(-3, 4), frac(3, 4)).is_err());
        assert!(RiverParams::new(frac(1, 2), frac(-1, 2), frac(1, 2)).is_err());
        let u = make_uniform(8).unwrap();
        let p = params(frac(1, 2), frac(-3, 4), frac(3, 4));
        assert!(mountain_river_search(&u, &p, 8).is_err());
    }

    #[test]
    fn window_for_acceptance_parameters() {
        let p = params(frac(1, 2), frac(-3, 4), frac(3, 4));
        let w = river_window(&p, 20).unwrap();
        assert_eq!(w.rho_prime, frac(17, 24));
        assert_eq!(w.r, 2);
        assert!(!w.capped);
    }
}
