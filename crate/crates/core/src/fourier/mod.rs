//! Fourier–Stieltjes coefficients of grid measures, the symbolic Riesz
//! product spectrum, level sets, range census and trigonometric conjugation.

mod decay;
mod riesz;

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::Zero;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::DyadicMeasure;
use crate::parallel;
use crate::rational::{self, Rational};

pub use decay::{spectral_decay_experiment, DecayReport, DecayRow};
pub use riesz::{riesz_coefficient, riesz_exact_coeffs, riesz_window, MAX_RIESZ_FACTORS};

/// Coefficients on the window `[−N, N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumTable {
    window: i64,
    source: String,
    values: Coefficients,
}

#[derive(Clone, Debug, PartialEq)]
enum Coefficients {
    /// Index `n + N`.
    Approx(Vec<Complex64>),
    /// Riesz product with factors `3^1, …, 3^kmax`, evaluated on demand.
    Riesz { kmax: u32 },
}

impl SpectrumTable {
    pub fn window(&self) -> i64 {
        self.window
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.values, Coefficients::Riesz { .. })
    }

    /// `μ̂(n)`, zero outside the window.
    pub fn get(&self, n: i64) -> Complex64 {
        if n.abs() > self.window {
            return Complex64::new(0.0, 0.0);
        }
        match &self.values {
            Coefficients::Approx(v) => v[(n + self.window) as usize],
            Coefficients::Riesz { kmax } => {
                Complex64::new(rational::to_f64(&riesz_coefficient(*kmax, n)), 0.0)
            }
        }
    }

    /// Exact value for symbolic tables.
    pub fn exact(&self, n: i64) -> Option<Rational> {
        match &self.values {
            Coefficients::Riesz { kmax } if n.abs() <= self.window => Some(riesz_coefficient(*kmax, n)),
            Coefficients::Riesz { .. } => Some(Rational::zero()),
            Coefficients::Approx(_) => None,
        }
    }

    /// `(n, μ̂(n))` over the window.
    pub fn rows(&self) -> Vec<(i64, Complex64)> {
        (-self.window..=self.window).map(|n| (n, self.get(n))).collect()
    }

    /// `max_{1 ≤ |n| ≤ N} |μ̂(n)|` and a frequency attaining it (the smallest
    /// positive one on ties).
    pub fn sup_abs_nonzero(&self) -> (f64, i64) {
        let mut best = (0.0, 0);
        for n in 1..=self.window {
            let a = self.get(n).norm().max(self.get(-n).norm());
            if a > best.0 {
                best = (a, n);
            }
        }
        best
    }
}

/// Fractional part of `n·p` in turns, computed exactly.
pub fn phase_turns(n: i64, p: &Rational) -> f64 {
    let num: BigInt = p.numer() * BigInt::from(n);
    let r = num.mod_floor(p.denom());
    rational::to_f64(&Rational::new(r, p.denom().clone()))
}

/// `e^{−2πi·n·p}` with the phase reduced exactly.
pub fn character(n: i64, p: &Rational) -> Complex64 {
    Complex64::from_polar(1.0, -TAU * phase_turns(n, p))
}

/// `Σ_j w_j e^{−2πi n x_j}` for one frequency.
pub fn coefficient(mu: &DyadicMeasure, n: i64) -> Complex64 {
    let modulus = 1i128 << mu.resolution();
    let scale = 1.0 / modulus as f64;
    mu.atoms()
        .iter()
        .map(|(&j, w)| {
            let ph = ((n as i128) * (j as i128)).rem_euclid(modulus) as f64 * scale;
            Complex64::from_polar(rational::to_f64(w), -TAU * ph)
        })
        .sum()
}

/// `μ̂(n)` for `|n| ≤ N`. Dense measures go through one FFT on the grid,
/// sparse ones through direct sums with exact phase reduction.
pub fn fourier_stieltjes(mu: &DyadicMeasure, window: i64) -> Result<SpectrumTable> {
    if window < 0 {
        return Err(Error::invalid("window must be nonnegative"));
    }
    let k = mu.resolution();
    let support = mu.support_size() as f64;
    let fft_cost = (1u64 << k.min(40)) as f64 * (k.max(1) as f64) * 4.0;
    let positive: Vec<Complex64> = if k <= 22 && support * (window as f64 + 1.0) > fft_cost {
        let size = 1usize << k;
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        for (&j, w) in mu.atoms() {
            buf[j as usize] = Complex64::new(rational::to_f64(w), 0.0);
        }
        FftPlanner::new().plan_fft_forward(size).process(&mut buf);
        (0..=window).map(|n| buf[(n as usize) & (size - 1)]).collect()
    } else {
        parallel::install(|| (0..=window).into_par_iter().map(|n| coefficient(mu, n)).collect())
    };
    let mut values = Vec::with_capacity(2 * window as usize + 1);
    values.extend(positive.iter().skip(1).rev().map(|c| c.conj()));
    values.extend(positive);
    let table = SpectrumTable {
        window,
        source: format!("measure at resolution {k} with {} atoms", mu.support_size()),
        values: Coefficients::Approx(values),
    };
    let bound = rational::to_f64(&mu.total_variation()) * (1.0 + 1e-12) + 1e-15;
    debug_assert!(table.rows().iter().all(|(_, c)| c.norm() <= bound));
    Ok(table)
}

/// Frequencies in the window whose coefficient lies within `tol` of `q`.
/// Symbolic tables are enumerated exactly.
pub fn level_set(table: &SpectrumTable, q: f64, tol: f64) -> Result<Vec<i64>> {
    match &table.values {
        Coefficients::Riesz { kmax } => riesz::level_set(*kmax, q, tol),
        Coefficients::Approx(_) => Ok((-table.window..=table.window)
            .filter(|&n| (table.get(n) - q).norm() <= tol)
            .collect()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RangeValue {
    /// Exact `num/den` for symbolic tables, otherwise absent.
    pub exact: Option<String>,
    pub re: f64,
    pub im: f64,
    pub multiplicity: u64,
}

/// Distinct values of the table. Float tables are clustered: a value joins
/// the first cluster whose representative lies within `tol`.
pub fn range_closure_report(table: &SpectrumTable, tol: f64) -> Vec<RangeValue> {
    match &table.values {
        Coefficients::Riesz { kmax } => riesz::range_census(*kmax, table.window),
        Coefficients::Approx(v) => {
            let mut sorted: Vec<Complex64> = v.clone();
            sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            let mut clusters: Vec<(Complex64, u64)> = Vec::new();
            for c in sorted {
                match clusters
                    .iter_mut()
                    .rev()
                    .take_while(|(rep, _)| c.re - rep.re <= tol)
                    .find(|(rep, _)| (c - *rep).norm() <= tol)
                {
                    Some(cl) => cl.1 += 1,
                    None => clusters.push((c, 1)),
                }
            }
            clusters
                .into_iter()
                .map(|(c, m)| RangeValue {
                    exact: None,
                    re: c.re,
                    im: c.im,
                    multiplicity: m,
                })
                .collect()
        }
    }
}

/// `f̂(j) ↦ −i·sgn(j)·f̂(j)`.
pub fn conjugate_coefficient(j: i64, c: Complex64) -> Complex64 {
    match j.signum() {
        1 => Complex64::new(c.im, -c.re),
        -1 => Complex64::new(-c.im, c.re),
        _ => Complex64::new(0.0, 0.0),
    }
}

/// Coefficients of the trigonometric conjugate.
pub fn conjugate_multiplier(table: &BTreeMap<i64, Complex64>) -> BTreeMap<i64, Complex64> {
    table
        .iter()
        .map(|(&j, &c)| (j, conjugate_coefficient(j, c)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{make_dirac, make_sparse, make_uniform};
    use crate::rational::{frac, int};

    #[test]
    fn dirac_at_zero_is_flat() {
        let t = fourier_stieltjes(&make_dirac(&int(0), 8).unwrap(), 50).unwrap();
        assert!(t.rows().iter().all(|(_, c)| (c - 1.0).norm() < 1e-15));
    }

    #[test]
    fn uniform_vanishes_off_multiples() {
        let k = 6;
        let t = fourier_stieltjes(&make_uniform(k).unwrap(), 200).unwrap();
        for (n, c) in t.rows() {
            // Σ_j 2^-k e^{-2πinj/2^k} is 1 when 2^k | n, else a vanishing geometric sum
            let expected = if n.rem_euclid(1 << k) == 0 { 1.0 } else { 0.0 };
            assert!((c - expected).norm() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn fft_and_direct_paths_agree() {
        let mu = make_sparse(&(0..200u64).map(|j| j * 3).collect(), 10).unwrap();
        let t = fourier_stieltjes(&mu, 600).unwrap();
        for n in [-599, -37, 0, 5, 511, 600] {
            assert!((t.get(n) - coefficient(&mu, n)).norm() < 1e-12);
        }
    }

    #[test]
    fn exact_phase_reduction() {
        assert_eq!(phase_turns(3, &frac(5, 8)), 0.875);
        assert_eq!(phase_turns(-1, &frac(1, 4)), 0.75);
        assert_eq!(phase_turns(1_000_000_007, &frac(1, 2)), 0.5);
    }

    #[test]
    fn conjugation_rules() {
        // cos(2πt) = (e_1 + e_{-1})/2  ↦  sin(2πt) = (e_1 − e_{-1})/(2i)
        let cos = BTreeMap::from([(1, Complex64::new(0.5, 0.0)), (-1, Complex64::new(0.5, 0.0))]);
        let sin = conjugate_multiplier(&cos);
        assert_eq!(sin[&1], Complex64::new(0.0, -0.5));
        assert_eq!(sin[&-1], Complex64::new(0.0, 0.5));
        let constant = BTreeMap::from([(0, Complex64::new(3.0, 0.0))]);
        assert_eq!(conjugate_multiplier(&constant)[&0], Complex64::new(0.0, 0.0));
        let f = BTreeMap::from([
            (0, Complex64::new(2.0, 1.0)),
            (3, Complex64::new(0.25, -1.0)),
            (-2, Complex64::new(-1.5, 0.5)),
        ]);
        let twice = conjugate_multiplier(&conjugate_multiplier(&f));
        for (j, c) in &f {
            let expected = if *j == 0 { Complex64::new(0.0, 0.0) } else { -c };
            assert_eq!(twice[j], expected);
        }
    }

    #[test]
    fn float_clusters() {
        let mu = make_dirac(&int(0), 4).unwrap();
        let t = fourier_stieltjes(&mu, 10).unwrap();
        let r = range_closure_report(&t, 1e-9);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].multiplicity, 21);
    }
}
