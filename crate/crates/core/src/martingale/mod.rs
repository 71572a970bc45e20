//! The dyadic martingale `m(ω) = μ(ω)` of a measure, turbulence
//! classification, the mountain-river search, `c_β` estimates and covering
//! families.

mod cbeta;
mod cover;
mod river;
mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::DyadicMeasure;
use crate::rational::{self, Pow2, Rational};

pub use cbeta::{c_beta_estimate, check_class_membership, CBetaEstimate, ClassMembership};
pub use cover::{select_cover, CoverFailure, CoverFamily, CoverOptions, ScaleAttempt};
pub use river::{
    mountain_river_search, river_window, RiverFailure, RiverOutcome, RiverParams, RiverWindow,
};
pub use split::{isolate_positive_part, isolate_positive_part_at, MeasureSplit};

/// Cell masses of every level `0..=depth`, nonzero entries only.
#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleTree {
    depth: u32,
    levels: Vec<BTreeMap<u64, Rational>>,
}

pub fn build_tree(mu: &DyadicMeasure) -> MartingaleTree {
    let depth = mu.resolution();
    let mut levels = vec![BTreeMap::new(); depth as usize + 1];
    levels[depth as usize] = mu.atoms().clone();
    for n in (0..depth as usize).rev() {
        let mut up: BTreeMap<u64, Rational> = BTreeMap::new();
        for (&j, w) in &levels[n + 1] {
            *up.entry(j >> 1).or_insert_with(Rational::zero) += w;
        }
        up.retain(|_, w| !w.is_zero());
        levels[n] = up;
    }
    MartingaleTree { depth, levels }
}

impl MartingaleTree {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn level(&self, n: u32) -> &BTreeMap<u64, Rational> {
        &self.levels[n as usize]
    }

    pub fn mass(&self, n: u32, cell: u64) -> Rational {
        self.levels[n as usize]
            .get(&cell)
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// `(m(ω₀), m(ω₁))`.
    pub fn children(&self, n: u32, cell: u64) -> (Rational, Rational) {
        (self.mass(n + 1, 2 * cell), self.mass(n + 1, 2 * cell + 1))
    }

    /// The path `γ(ω)` from the root to `ω`, as `(level, cell)` pairs.
    pub fn path(&self, n: u32, cell: u64) -> Vec<(u32, u64)> {
        (0..=n).map(|j| (j, cell >> (n - j))).collect()
    }

    pub fn root_mass(&self) -> Rational {
        self.mass(0, 0)
    }

    pub fn level_sum(&self, n: u32) -> Rational {
        self.levels[n as usize].values().sum()
    }

    /// Checks `m(ω) = m(ω₀) + m(ω₁)` at every vertex.
    pub fn is_consistent(&self) -> bool {
        (0..self.depth).all(|n| {
            let mut from_children: BTreeMap<u64, Rational> = BTreeMap::new();
            for (&j, w) in self.level(n + 1) {
                *from_children.entry(j >> 1).or_insert_with(Rational::zero) += w;
            }
            from_children.retain(|_, w| !w.is_zero());
            &from_children == self.level(n)
        })
    }

    /// Vertices of level `n` with a nonzero mass or a nonzero child.
    fn active(&self, n: u32) -> BTreeSet<u64> {
        let mut out: BTreeSet<u64> = self.level(n).keys().copied().collect();
        if n < self.depth {
            out.extend(self.level(n + 1).keys().map(|j| j >> 1));
        }
        out
    }
}

/// The factor `2^α` against which children are compared.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitThreshold {
    /// `2^α` for a rational `α ∈ (−1, 0)`, compared exactly.
    Exponent(#[serde(with = "rational::serde_str")] Rational),
    /// An explicit rational factor in `(0, 1)` standing for `2^α`.
    Factor(#[serde(with = "rational::serde_str")] Rational),
}

impl SplitThreshold {
    pub fn exponent(alpha: Rational) -> Result<Self> {
        if alpha <= rational::int(-1) || !alpha.is_negative() {
            return Err(Error::invalid(format!(
                "alpha must lie in (-1, 0), got {}",
                rational::to_fraction_string(&alpha)
            )));
        }
        Ok(SplitThreshold::Exponent(alpha))
    }

    pub fn factor(f: Rational) -> Result<Self> {
        if !f.is_positive() || f >= rational::int(1) {
            return Err(Error::invalid("threshold factor must lie in (0, 1)"));
        }
        Ok(SplitThreshold::Factor(f))
    }

    /// `x < 2^α · y`.
    pub fn below(&self, x: &Rational, y: &Rational) -> bool {
        match self {
            SplitThreshold::Exponent(a) => {
                Pow2(a.clone()).cmp_scaled(x, y) == std::cmp::Ordering::Less
            }
            SplitThreshold::Factor(f) => *x < f * y,
        }
    }

    /// `x ≤ (2^α)^j · y`.
    pub fn power_at_least(&self, x: &Rational, j: u32, y: &Rational) -> bool {
        match self {
            SplitThreshold::Exponent(a) => {
                let e = a * Rational::from_integer(j.into());
                Pow2(e).cmp_scaled(x, y) != std::cmp::Ordering::Greater
            }
            SplitThreshold::Factor(f) => *x <= num_traits::pow(f.clone(), j as usize) * y,
        }
    }

    pub fn approx(&self) -> f64 {
        match self {
            SplitThreshold::Exponent(a) => Pow2(a.clone()).approx(),
            SplitThreshold::Factor(f) => rational::to_f64(f),
        }
    }
}

impl fmt::Display for SplitThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitThreshold::Exponent(a) => write!(f, "2^({})", rational::to_fraction_string(a)),
            SplitThreshold::Factor(x) => write!(f, "{}", rational::to_fraction_string(x)),
        }
    }
}

/// Partition of `F_n` into turbulent (Ξ), descent (A), ascent (B) and tie/zero
/// (Z) vertices. `Z` is stored as a count plus the ties with nonzero mass;
/// vertices absent from every list have zero mass and zero children.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VertexClassification {
    pub level: u32,
    pub threshold: SplitThreshold,
    pub turbulent: Vec<u64>,
    pub descent: Vec<u64>,
    pub ascent: Vec<u64>,
    pub zero_count: u64,
    pub nonzero_ties: Vec<u64>,
}

impl VertexClassification {
    pub fn turbulent_mass(&self, tree: &MartingaleTree) -> Rational {
        self.turbulent.iter().map(|&c| tree.mass(self.level, c)).sum()
    }

    /// `Σ_{A_n} (m(ω₀) − m(ω₁))`.
    pub fn descent_excess(&self, tree: &MartingaleTree) -> Rational {
        self.descent
            .iter()
            .map(|&c| {
                let (a, b) = tree.children(self.level, c);
                a - b
            })
            .sum()
    }

    /// `Σ_{B_n} (m(ω₁) − m(ω₀))`.
    pub fn ascent_excess(&self, tree: &MartingaleTree) -> Rational {
        self.ascent
            .iter()
            .map(|&c| {
                let (a, b) = tree.children(self.level, c);
                b - a
            })
            .sum()
    }

    pub fn total_vertices(&self) -> u64 {
        1u64 << self.level
    }
}

pub fn classify(tree: &MartingaleTree, n: u32, threshold: &SplitThreshold) -> Result<VertexClassification> {
    if n >= tree.depth() {
        return Err(Error::invalid(format!(
            "level {n} has no children in a tree of depth {}",
            tree.depth()
        )));
    }
    let mut out = VertexClassification {
        level: n,
        threshold: threshold.clone(),
        turbulent: Vec::new(),
        descent: Vec::new(),
        ascent: Vec::new(),
        zero_count: 0,
        nonzero_ties: Vec::new(),
    };
    let active = tree.active(n);
    for &c in &active {
        let m = tree.mass(n, c);
        let (m0, m1) = tree.children(n, c);
        if threshold.below(&m0, &m) && threshold.below(&m1, &m) {
            out.turbulent.push(c);
        } else if m0 > m1 {
            out.descent.push(c);
        } else if m0 < m1 {
            out.ascent.push(c);
        } else {
            out.nonzero_ties.push(c);
        }
    }
    out.zero_count = (1u64 << n) - active.len() as u64 + out.nonzero_ties.len() as u64;
    Ok(out)
}

/// Turbulent-ancestor counts `S_r(γ(ω))` for the leaves of level `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TurbulenceCounts {
    pub r: u32,
    pub k: u32,
    /// Counts for leaves of nonzero mass; other leaves do not enter any sum.
    pub counts: BTreeMap<u64, u32>,
    /// `Σ_{n=r+1}^{k−1} Σ_{Ξ_n} m(ω)`.
    #[serde(with = "rational::serde_str")]
    pub window_turbulent_mass: Rational,
    /// `Σ_{F_k} m(ω)·S_r(γ(ω))`.
    #[serde(with = "rational::serde_str")]
    pub weighted_counts: Rational,
    /// Turbulent vertex sets of the levels `r+1..=k−1`.
    #[serde(skip)]
    turbulent: BTreeMap<u32, BTreeSet<u64>>,
}

impl TurbulenceCounts {
    pub fn identity_holds(&self) -> bool {
        self.window_turbulent_mass == self.weighted_counts
    }

    /// `S_r` for any leaf, including zero-mass ones.
    pub fn count_for(&self, leaf: u64) -> u32 {
        if let Some(&c) = self.counts.get(&leaf) {
            return c;
        }
        self.turbulent
            .iter()
            .filter(|(&j, set)| set.contains(&(leaf >> (self.k - j))))
            .count() as u32
    }
}

pub fn s_r_counts(
    tree: &MartingaleTree,
    threshold: &SplitThreshold,
    r: u32,
    k: u32,
) -> Result<TurbulenceCounts> {
    if k > tree.depth() || k < 2 || r > k - 2 {
        return Err(Error::invalid(format!(
            "need 0 <= r <= k-2 and k <= depth; got r={r}, k={k}, depth={}",
            tree.depth()
        )));
    }
    let mut turbulent = BTreeMap::new();
    let mut window_mass = Rational::zero();
    for n in r + 1..k {
        let cls = classify(tree, n, threshold)?;
        window_mass += cls.turbulent_mass(tree);
        turbulent.insert(n, cls.turbulent.into_iter().collect::<BTreeSet<_>>());
    }
    let mut counts = BTreeMap::new();
    let mut weighted = Rational::zero();
    for (&leaf, m) in tree.level(k) {
        let s = turbulent
            .iter()
            .filter(|(&j, set)| set.contains(&(leaf >> (k - j))))
            .count() as u32;
        weighted += m * Rational::from_integer(s.into());
        counts.insert(leaf, s);
    }
    Ok(TurbulenceCounts {
        r,
        k,
        counts,
        window_turbulent_mass: window_mass,
        weighted_counts: weighted,
        turbulent,
    })
}

/// The two halves of the averaging argument behind the mountain-river search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AveragingBounds {
    /// `⌊ρ′(k−r)⌋`.
    pub split: u64,
    /// `Σ_{S_r ≤ split} m·S_r`.
    #[serde(with = "rational::serde_str")]
    pub part_one: Rational,
    /// `ρ′(k−r)‖μ‖`.
    #[serde(with = "rational::serde_str")]
    pub part_one_bound: Rational,
    pub part_one_holds: bool,
    /// Leaves violating `m(ω) ≤ (2^α)^{S_r}‖μ‖`.
    pub leaf_bound_violations: Vec<u64>,
}

pub fn averaging_bounds(
    tree: &MartingaleTree,
    counts: &TurbulenceCounts,
    threshold: &SplitThreshold,
    rho_prime: &Rational,
) -> AveragingBounds {
    let total = tree.root_mass().abs();
    let width = Rational::from_integer((counts.k - counts.r).into());
    let split_r = rho_prime * &width;
    let split: u64 = rational::floor(&split_r).try_into().unwrap_or(0);
    let mut part_one = Rational::zero();
    let mut violations = Vec::new();
    for (&leaf, &s) in &counts.counts {
        let m = tree.mass(counts.k, leaf);
        if (s as u64) <= split {
            part_one += &m * Rational::from_integer(s.into());
        }
        if !threshold.power_at_least(&m, s, &total) {
            violations.push(leaf);
        }
    }
    let bound = split_r * &total;
    AveragingBounds {
        split,
        part_one_holds: part_one <= bound,
        part_one,
        part_one_bound: bound,
        leaf_bound_violations: violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{make_dirac, make_uniform};
    use crate::rational::{frac, int};

    fn alpha() -> SplitThreshold {
        SplitThreshold::exponent(frac(-3, 4)).unwrap()
    }

    #[test]
    fn tree_examples() {
        let d = build_tree(&make_dirac(&int(0), 5).unwrap());
        for n in 0..=5 {
            assert_eq!(d.level(n).len(), 1);
            assert_eq!(d.mass(n, 0), int(1));
        }
        let u = build_tree(&make_uniform(4).unwrap());
        for n in 0..=4 {
            assert!(u.level(n).values().all(|m| *m == rational::pow2(-(n as i64))));
        }
        let mu = DyadicMeasure::from_dense(2, vec![frac(1, 2), frac(1, 4), frac(1, 4), int(0)]).unwrap();
        let t = build_tree(&mu);
        assert_eq!(t.mass(1, 0), frac(3, 4));
        assert_eq!(t.mass(1, 1), frac(1, 4));
        assert!(t.is_consistent());
        assert_eq!(t.path(2, 3), vec![(0, 0), (1, 1), (2, 3)]);
    }

    #[test]
    fn classify_uniform_and_dirac() {
        let u = build_tree(&make_uniform(6).unwrap());
        let c = classify(&u, 3, &alpha()).unwrap();
        assert_eq!(c.turbulent.len(), 8);
        let d = build_tree(&make_dirac(&int(0), 6).unwrap());
        let c = classify(&d, 3, &alpha()).unwrap();
        assert!(c.turbulent.is_empty());
        assert_eq!(c.descent, vec![0]);
        assert_eq!(c.zero_count, 7);
        assert!(classify(&d, 6, &alpha()).is_err());
        assert!(SplitThreshold::exponent(int(-1)).is_err());
        assert!(SplitThreshold::exponent(int(0)).is_err());
    }

    #[test]
    fn explicit_factor_threshold() {
        let mu = DyadicMeasure::from_dense(1, vec![frac(3, 5), frac(2, 5)]).unwrap();
        let t = build_tree(&mu);
        let c = classify(&t, 0, &SplitThreshold::factor(frac(7, 10)).unwrap()).unwrap();
        assert_eq!(c.turbulent, vec![0]);
        let c = classify(&t, 0, &SplitThreshold::factor(frac(1, 2)).unwrap()).unwrap();
        assert_eq!(c.descent, vec![0]);
    }

    #[test]
    fn exact_tie_with_mass_is_turbulent() {
        let t = build_tree(&DyadicMeasure::from_dense(1, vec![frac(1, 2), frac(1, 2)]).unwrap());
        // 2^(-1/1000) > 1/2 still
        let c = classify(&t, 0, &SplitThreshold::exponent(frac(-999, 1000)).unwrap()).unwrap();
        assert_eq!(c.turbulent, vec![0]);
    }

    #[test]
    fn counts_for_uniform_and_dirac() {
        let u = build_tree(&make_uniform(8).unwrap());
        let s = s_r_counts(&u, &alpha(), 2, 8).unwrap();
        assert!(s.counts.values().all(|&c| c == 8 - 1 - 2));
        assert!(s.identity_holds());
        let d = build_tree(&make_dirac(&int(0), 8).unwrap());
        let s = s_r_counts(&d, &alpha(), 0, 8).unwrap();
        assert!(s.counts.values().all(|&c| c == 0));
        assert_eq!(s.count_for(17), 0);
        assert!(s_r_counts(&d, &alpha(), 7, 8).is_err());
    }

    #[test]
    fn averaging_bounds_hold_for_uniform() {
        let u = build_tree(&make_uniform(8).unwrap());
        let s = s_r_counts(&u, &alpha(), 1, 8).unwrap();
        let b = averaging_bounds(&u, &s, &alpha(), &frac(1, 2));
        assert!(b.part_one_holds);
        assert!(b.leaf_bound_violations.is_empty());
    }
}
