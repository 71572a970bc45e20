use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_resolution, DyadicMeasure};
use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Largest grid on which sampled (dense) constructors are evaluated.
const MAX_DENSE_RESOLUTION: u32 = 26;

pub fn make_dirac(position: &Rational, resolution: u32) -> Result<DyadicMeasure> {
    check_resolution(resolution)?;
    let x = rational::frac_part(position);
    let scaled = &x * Rational::from_integer(rational::pow2_int(resolution));
    if !scaled.is_integer() {
        return Err(Error::OffGrid {
            position: rational::to_fraction_string(position),
            resolution,
        });
    }
    let cell: u64 = scaled
        .to_integer()
        .try_into()
        .expect("grid index fits in u64");
    DyadicMeasure::from_atoms(resolution, [(cell, Rational::one())])
}

pub fn make_uniform(resolution: u32) -> Result<DyadicMeasure> {
    check_resolution(resolution)?;
    if resolution > MAX_DENSE_RESOLUTION {
        return Err(Error::ResolutionTooLarge {
            requested: resolution,
            max: MAX_DENSE_RESOLUTION,
        });
    }
    let w = rational::pow2(-(resolution as i64));
    DyadicMeasure::from_atoms(resolution, (0..1u64 << resolution).map(|j| (j, w.clone())))
}

/// Equal masses `1/#support` on the listed cells.
pub fn make_sparse(support: &BTreeSet<u64>, resolution: u32) -> Result<DyadicMeasure> {
    if support.is_empty() {
        return Err(Error::invalid("sparse measure needs a non-empty support"));
    }
    let w = Rational::new(BigInt::one(), BigInt::from(support.len()));
    DyadicMeasure::from_atoms(resolution, support.iter().map(|&j| (j, w.clone())))
}

/// Cells `j²` for `0 ≤ j ≤ ⌊√K⌋`.
pub fn square_cells(resolution: u32) -> BTreeSet<u64> {
    let mut out = BTreeSet::new();
    let mut j = 0u64;
    while j * j <= resolution as u64 {
        out.insert(j * j);
        j += 1;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChildMask {
    Both,
    Left,
    Right,
    Neither,
}

/// Self-similar measure: at level `i` every kept cell passes its mass to the
/// children selected by `pattern[i % pattern.len()]`, split equally.
pub fn make_cantor(pattern: &[ChildMask], depth: u32) -> Result<DyadicMeasure> {
    check_resolution(depth)?;
    if pattern.is_empty() {
        return Err(Error::invalid("cantor pattern is empty"));
    }
    let mut cells: Vec<u64> = vec![0];
    let mut mass = Rational::one();
    for level in 0..depth {
        let mask = pattern[level as usize % pattern.len()];
        let children: &[u64] = match mask {
            ChildMask::Both => &[0, 1],
            ChildMask::Left => &[0],
            ChildMask::Right => &[1],
            ChildMask::Neither => {
                return Err(Error::invalid(format!(
                    "cantor pattern keeps no child at level {level}; all mass is lost"
                )))
            }
        };
        if cells.len() * children.len() > 1 << MAX_DENSE_RESOLUTION {
            return Err(Error::invalid("cantor support too large to materialize"));
        }
        cells = cells
            .iter()
            .flat_map(|&c| children.iter().map(move |&b| 2 * c + b))
            .collect();
        mass /= Rational::from_integer(BigInt::from(children.len()));
    }
    DyadicMeasure::from_atoms(depth, cells.into_iter().map(|c| (c, mass.clone())))
}

/// `alternating` Cantor pattern: keep both children, then the left one.
pub fn alternating_pattern() -> Vec<ChildMask> {
    vec![ChildMask::Both, ChildMask::Left]
}

/// Grid samples of `∏_{k=1}^{kmax} (1 + cos(2π·3^k·t))`, normalized to mass 1.
///
/// The weights are floats (converted exactly), so the result is flagged as
/// sampled.
pub fn make_riesz_sampled(kmax: u32, resolution: u32) -> Result<DyadicMeasure> {
    if kmax == 0 {
        return make_uniform(resolution);
    }
    check_resolution(resolution)?;
    let reach = 3f64.powi(kmax as i32);
    if resolution < 4 || reach > (resolution as f64 - 4.0).exp2() {
        return Err(Error::invalid(format!(
            "resolution {resolution} too coarse for {kmax} Riesz factors (need 3^{kmax} <= 2^(K-4))"
        )));
    }
    if resolution > MAX_DENSE_RESOLUTION {
        return Err(Error::ResolutionTooLarge {
            requested: resolution,
            max: MAX_DENSE_RESOLUTION,
        });
    }
    let n = 1u64 << resolution;
    let mask = n - 1;
    let powers: Vec<u64> = (1..=kmax).map(|k| 3u64.pow(k) & mask).collect();
    let raw: Vec<f64> = (0..n)
        .map(|j| {
            powers
                .iter()
                .map(|&p| {
                    let phase = (p.wrapping_mul(j) & mask) as f64 / n as f64;
                    1.0 + (std::f64::consts::TAU * phase).cos()
                })
                .product::<f64>()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let mut atoms = Vec::with_capacity(raw.len());
    for (j, w) in raw.into_iter().enumerate() {
        let w = (w / total).max(0.0);
        if w > 0.0 {
            atoms.push((j as u64, rational::from_f64(w)?));
        }
    }
    Ok(DyadicMeasure::from_atoms(resolution, atoms)?.mark_sampled())
}

/// Random positive member of the class `M(β, k)`: at most `⌊2^{βk}⌋` nonzero
/// level-`k` cells, integer masses normalized to total 1, atoms placed at a
/// random sub-cell when the resolution is finer than `k`.
pub fn random_class_member<R: Rng + ?Sized>(
    rng: &mut R,
    resolution: u32,
    beta: &Rational,
    k: u32,
) -> Result<DyadicMeasure> {
    check_resolution(resolution)?;
    if k > resolution {
        return Err(Error::invalid(format!("level {k} exceeds resolution {resolution}")));
    }
    let cap = rational::floor_pow2(&(beta * Rational::from_integer(BigInt::from(k))))
        .min(1u64 << k)
        .min(1 << 20);
    let count = rng.random_range(1..=cap);
    let cells: Vec<u64> = if k <= 30 {
        sample(rng, 1usize << k, count as usize)
            .into_iter()
            .map(|c| c as u64)
            .collect()
    } else {
        let mut set = BTreeSet::new();
        while set.len() < count as usize {
            set.insert(rng.random_range(0..1u64 << k));
        }
        set.into_iter().collect()
    };
    let shift = resolution - k;
    let weights: Vec<u64> = (0..cells.len()).map(|_| rng.random_range(1..=64)).collect();
    let total: u64 = weights.iter().sum();
    let atoms = cells.into_iter().zip(weights).map(|(c, w)| {
        let offset = if shift == 0 { 0 } else { rng.random_range(0..1u64 << shift) };
        (
            (c << shift) | offset,
            Rational::new(BigInt::from(w), BigInt::from(total)),
        )
    });
    let atoms: Vec<_> = atoms.collect();
    let mu = DyadicMeasure::from_atoms(resolution, atoms)?;
    debug_assert!(!mu.total_mass().is_zero());
    Ok(mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dirac_examples() {
        let d = make_dirac(&int(0), 4).unwrap();
        let mut expected = vec![int(0); 16];
        expected[0] = int(1);
        assert_eq!(d.dense_weights(), expected);
        assert_eq!(make_dirac(&frac(1, 2), 1).unwrap().dense_weights(), vec![int(0), int(1)]);
        assert_eq!(make_dirac(&int(0), 10).unwrap().total_variation(), int(1));
        assert!(matches!(make_dirac(&frac(1, 3), 4), Err(Error::OffGrid { .. })));
    }

    #[test]
    fn uniform_weights() {
        let u = make_uniform(2).unwrap();
        assert_eq!(u.dense_weights(), vec![frac(1, 4); 4]);
        assert_eq!(u.total_variation(), int(1));
    }

    #[test]
    fn sparse_single_cell_is_dirac() {
        let s = make_sparse(&BTreeSet::from([0]), 5).unwrap();
        assert_eq!(s, make_dirac(&int(0), 5).unwrap());
        assert!(make_sparse(&BTreeSet::new(), 3).is_err());
        assert_eq!(square_cells(16), BTreeSet::from([0, 1, 4, 9, 16]));
    }

    #[test]
    fn cantor_degenerate_patterns() {
        assert_eq!(make_cantor(&[ChildMask::Both], 5).unwrap(), make_uniform(5).unwrap());
        assert_eq!(
            make_cantor(&[ChildMask::Left], 5).unwrap(),
            make_dirac(&int(0), 5).unwrap()
        );
        assert!(make_cantor(&[ChildMask::Both, ChildMask::Neither], 4).is_err());
    }

    #[test]
    fn cantor_alternating_cell_count() {
        for d in 1..=6u32 {
            let mu = make_cantor(&alternating_pattern(), 2 * d).unwrap();
            assert_eq!(mu.support_size(), 1 << d);
            assert!(mu.atoms().values().all(|w| *w == rational::pow2(-(d as i64))));
        }
    }

    #[test]
    fn riesz_sampled_is_probability() {
        let mu = make_riesz_sampled(3, 12).unwrap();
        assert!(mu.is_sampled() && mu.is_positive());
        assert!((rational::to_f64(&mu.total_mass()) - 1.0).abs() < 1e-12);
        assert_eq!(make_riesz_sampled(0, 6).unwrap(), make_uniform(6).unwrap());
        assert!(make_riesz_sampled(4, 8).is_err());
    }

    #[test]
    fn random_members_respect_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mu = random_class_member(&mut rng, 12, &frac(1, 2), 10).unwrap();
            assert!(mu.is_positive());
            assert_eq!(mu.total_mass(), int(1));
            assert!(mu.level_masses(10).len() <= 32);
        }
    }
}
