use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::DyadicMeasure;
use crate::rational::{self, Rational};

/// Nonzero level-`k` cell count against the cap `⌊2^{βk}⌋` of `M(β, k)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassMembership {
    pub k: u32,
    #[serde(with = "rational::serde_str")]
    pub beta: Rational,
    pub count: u64,
    pub cap: u64,
    pub member: bool,
}

pub(crate) fn cell_cap(beta: &Rational, k: u32) -> u64 {
    rational::floor_pow2(&(beta * Rational::from_integer(k.into())))
}

fn check_level(mu: &DyadicMeasure, k: u32) -> Result<()> {
    if k > mu.resolution() {
        return Err(Error::invalid(format!(
            "level {k} is finer than the measure resolution {}",
            mu.resolution()
        )));
    }
    Ok(())
}

pub fn check_class_membership(mu: &DyadicMeasure, beta: &Rational, k: u32) -> Result<ClassMembership> {
    check_level(mu, k)?;
    let count = mu.level_masses(k).len() as u64;
    let cap = cell_cap(beta, k);
    Ok(ClassMembership {
        k,
        beta: beta.clone(),
        count,
        cap,
        member: count <= cap,
    })
}

/// Largest `|μ|`-mass carried by at most `⌊2^{βk}⌋` cells of level `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CBetaEstimate {
    pub k: u32,
    #[serde(with = "rational::serde_str")]
    pub beta: Rational,
    pub cap: u64,
    #[serde(with = "rational::serde_str")]
    pub value: Rational,
    /// The chosen cells, heaviest first (ties by index).
    pub cells: Vec<u64>,
}

pub fn c_beta_estimate(mu: &DyadicMeasure, beta: &Rational, k: u32) -> Result<CBetaEstimate> {
    check_level(mu, k)?;
    let cap = cell_cap(beta, k);
    let mut cells: Vec<(u64, Rational)> = mu.level_variation(k).into_iter().collect();
    cells.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    cells.truncate(cap.min(usize::MAX as u64) as usize);
    Ok(CBetaEstimate {
        k,
        beta: beta.clone(),
        cap,
        value: cells.iter().map(|(_, w)| w).sum(),
        cells: cells.into_iter().map(|(c, _)| c).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{alternating_pattern, make_cantor, make_dirac, make_uniform};
    use crate::rational::{frac, int};

    #[test]
    fn dirac_and_uniform() {
        let d = make_dirac(&int(0), 10).unwrap();
        for k in 0..=10 {
            assert_eq!(c_beta_estimate(&d, &frac(1, 3), k).unwrap().value, int(1));
        }
        let u = make_uniform(10).unwrap();
        for k in 0..=10u32 {
            let got = c_beta_estimate(&u, &frac(1, 2), k).unwrap().value;
            let cells = (2f64.powf(k as f64 / 2.0)).floor() as i64;
            assert_eq!(got, frac(cells, 1 << k));
        }
    }

    #[test]
    fn cantor_boundary_membership() {
        for d in 1..=6u32 {
            let mu = make_cantor(&alternating_pattern(), 2 * d).unwrap();
            let m = check_class_membership(&mu, &frac(1, 2), 2 * d).unwrap();
            assert_eq!(m.count, 1 << d);
            assert!(m.member);
            assert_eq!(c_beta_estimate(&mu, &frac(1, 2), 2 * d).unwrap().value, int(1));
        }
        let u = make_uniform(6).unwrap();
        assert!(!check_class_membership(&u, &frac(9, 10), 3).unwrap().member);
        assert!(check_class_membership(&make_dirac(&int(0), 6).unwrap(), &int(0), 6).unwrap().member);
    }
}
