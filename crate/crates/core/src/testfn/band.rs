use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use super::hn::{make_hn, Orientation, TestFunctionHn};
use super::witness::{witness_pipeline, WitnessReport};
use crate::error::{Error, Result};
use crate::fourier::{character, coefficient, conjugate_coefficient};
use crate::ledger::{self, Check};
use crate::measure::DyadicMeasure;
use crate::parallel;
use crate::rational::{self, int, pow2, Rational};

/// Default number of high-band terms summed before the analytic tail.
pub const DEFAULT_TAIL_TERMS: u64 = 1 << 16;

/// Largest quadrature grid used by the band experiment.
pub const MAX_GRID_BITS: u32 = 24;

/// `ĥ(j) = Σ_blocks v·(e^{−2πija} − e^{−2πijb})/(2πij)`, `ĥ(0) = 0`.
pub fn hn_fourier(h: &TestFunctionHn, j: i64) -> Complex64 {
    if j == 0 {
        return Complex64::new(h.integral().to_f64().unwrap_or(0.0), 0.0);
    }
    let pieces = h.step().pieces();
    let mut total = Complex64::new(0.0, 0.0);
    for (i, (start, value)) in pieces.iter().enumerate() {
        if value.is_zero() {
            continue;
        }
        let end = pieces.get(i + 1).map(|(s, _)| s.clone()).unwrap_or_else(|| int(1));
        total += (character(j, start) - character(j, &end)) * rational::to_f64(value);
    }
    total / Complex64::new(0.0, TAU * j as f64)
}

/// The three atoms `(position, mass)` of the distributional derivative,
/// positions reduced to `[0, 1)`.
pub fn hn_derivative_measure(h: &TestFunctionHn) -> Vec<(Rational, Rational)> {
    h.derivative_atoms()
}

/// `ν̂(j) = Σ mass·e^{−2πij·position}`.
pub fn derivative_fourier(atoms: &[(Rational, Rational)], j: i64) -> Complex64 {
    atoms
        .iter()
        .map(|(p, m)| character(j, p) * rational::to_f64(m))
        .sum()
}

/// Smallest positive `j` with `j ≥ a·2^{2n/3}` (i.e. `j³ ≥ a³2^{2n}`).
pub fn band_low_edge(a: &Rational, n: u32) -> u64 {
    let target = a * a * a * pow2(2 * n as i64);
    let mut j = (rational::to_f64(a) * (2.0 * n as f64 / 3.0).exp2()).floor().max(0.0) as u64;
    let cube = |j: u64| Rational::from_integer((j as i128).pow(3).into());
    while j > 0 && cube(j - 1) >= target {
        j -= 1;
    }
    while cube(j) < target {
        j += 1;
    }
    j.max(1)
}

/// `⌊b·2^{2n}⌋`, the largest in-band frequency.
pub fn band_high_edge(b: &Rational, n: u32) -> u64 {
    rational::floor(&(b * pow2(2 * n as i64)))
        .to_u64()
        .unwrap_or(u64::MAX)
}

/// Energies of `h_n` below `a·2^{2n/3}` and above `b·2^{2n}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandEnergies {
    pub n: u32,
    #[serde(with = "rational::serde_str")]
    pub epsilon: Rational,
    #[serde(with = "rational::serde_str")]
    pub a: Rational,
    #[serde(with = "rational::serde_str")]
    pub b: Rational,
    /// Low band is `1 ≤ |j| ≤ low_last` (empty when 0).
    pub low_last: u64,
    pub low: f64,
    /// `8π²a³`.
    pub low_bound: f64,
    /// High band summed over `high_first ≤ |j| ≤ high_last`.
    pub high_first: u64,
    pub high_last: u64,
    pub high_sum: f64,
    /// `9·2^{2n}/(2π²·high_last)` covering `|j| > high_last`.
    pub high_majorant: f64,
    /// `high_sum + high_majorant`.
    pub high_upper: f64,
    /// `18/b`.
    pub high_bound: f64,
    pub low_ok: bool,
    pub high_ok: bool,
}

fn energy(h: &TestFunctionHn, from: u64, to: u64) -> f64 {
    if from > to {
        return 0.0;
    }
    let terms: Vec<f64> = parallel::install(|| {
        (from..=to)
            .into_par_iter()
            .map(|j| hn_fourier(h, j as i64).norm_sqr())
            .collect()
    });
    // |ĥ(−j)| = |ĥ(j)| for real h
    2.0 * terms.iter().sum::<f64>()
}

pub fn band_tail_energies(h: &TestFunctionHn, a: &Rational, b: &Rational, tail_terms: u64) -> Result<BandEnergies> {
    if !a.is_positive() || !b.is_positive() {
        return Err(Error::invalid("band edges a and b must be positive"));
    }
    if tail_terms == 0 {
        return Err(Error::invalid("at least one high-band term is needed"));
    }
    let n = h.n;
    let low_last = band_low_edge(a, n) - 1;
    let low = energy(h, 1, low_last);
    let high_first = band_high_edge(b, n).saturating_add(1);
    let high_last = high_first.saturating_add(tail_terms - 1);
    let high_sum = energy(h, high_first, high_last);
    let high_majorant = 9.0 * (2.0 * n as f64).exp2() / (2.0 * PI * PI * high_last as f64);
    let high_upper = high_sum + high_majorant;
    let af = rational::to_f64(a);
    let low_bound = 8.0 * PI * PI * af * af * af;
    let high_bound = 18.0 / rational::to_f64(b);
    Ok(BandEnergies {
        n,
        epsilon: h.epsilon.clone(),
        a: a.clone(),
        b: b.clone(),
        low_last,
        low,
        low_bound,
        high_first,
        high_last,
        high_sum,
        high_majorant,
        high_upper,
        high_bound,
        low_ok: low < low_bound,
        high_ok: high_upper < high_bound,
    })
}

/// Out-of-band part `φ_n` and the analytic band polynomial
/// `p_n = (h − φ) + i(h̃ − φ̃)`, evaluated coefficient-wise on demand.
#[derive(Clone, Debug)]
pub struct BandProjection {
    pub h: TestFunctionHn,
    pub low_edge: u64,
    pub high_edge: u64,
    pub truncation: u64,
}

impl BandProjection {
    pub fn new(h: TestFunctionHn, a: &Rational, b: &Rational, truncation: u64) -> Result<Self> {
        if !a.is_positive() || !b.is_positive() {
            return Err(Error::invalid("band edges a and b must be positive"));
        }
        let low_edge = band_low_edge(a, h.n);
        let high_edge = band_high_edge(b, h.n);
        if truncation < high_edge {
            return Err(Error::invalid(format!(
                "truncation {truncation} does not cover the band edge {high_edge}"
            )));
        }
        Ok(BandProjection {
            h,
            low_edge,
            high_edge,
            truncation,
        })
    }

    pub fn in_band(&self, j: i64) -> bool {
        let a = j.unsigned_abs();
        a >= self.low_edge && a <= self.high_edge
    }

    pub fn h_hat(&self, j: i64) -> Complex64 {
        hn_fourier(&self.h, j)
    }

    pub fn phi_hat(&self, j: i64) -> Complex64 {
        if j.unsigned_abs() <= self.truncation && !self.in_band(j) {
            self.h_hat(j)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// `f + i·(−i·sgn j)·f` with `f = ĥ − φ̂`.
    pub fn p_hat(&self, j: i64) -> Complex64 {
        let f = self.h_hat(j) - self.phi_hat(j);
        f + Complex64::new(0.0, 1.0) * conjugate_coefficient(j, f)
    }

    /// `φ̂` over `|j| ≤ limit`, nonzero entries only.
    pub fn phi_table(&self, limit: u64) -> BTreeMap<i64, Complex64> {
        let limit = limit.min(self.truncation) as i64;
        (-limit..=limit)
            .map(|j| (j, self.phi_hat(j)))
            .filter(|(_, c)| c.norm() > 0.0)
            .collect()
    }

    /// `p̂` over the band, positive frequencies.
    pub fn p_table(&self) -> Vec<(i64, Complex64)> {
        (self.low_edge as i64..=self.high_edge as i64)
            .map(|j| (j, self.p_hat(j)))
            .collect()
    }

    /// `‖φ‖₂²` within the truncation.
    pub fn phi_energy(&self) -> f64 {
        let low = energy(&self.h, 1, self.low_edge - 1);
        let high = energy(&self.h, self.high_edge + 1, self.truncation);
        low + high
    }

    /// Evaluates `p̂` at the band edges, small frequencies, negative
    /// frequencies and seeded random probes; lists the frequencies where the
    /// support or the in-band identity `p̂ = 2ĥ` fails.
    pub fn support_check(&self, random_probes: usize, seed: u64) -> SupportCheck {
        let mut probes: Vec<i64> = (-64..=64).collect();
        for edge in [self.low_edge as i64, self.high_edge as i64] {
            for d in -8..=8 {
                probes.push(edge + d);
                probes.push(-(edge + d));
            }
        }
        let span = self.truncation.min(i64::MAX as u64 / 2) as i64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..random_probes {
            probes.push(rng.random_range(-span..=span));
        }
        probes.sort_unstable();
        probes.dedup();
        let mut outside = Vec::new();
        let mut mismatched = Vec::new();
        for &j in &probes {
            let p = self.p_hat(j);
            if j > 0 && self.in_band(j) {
                if p != self.h_hat(j) * 2.0 {
                    mismatched.push(j);
                }
            } else if p.norm() != 0.0 {
                outside.push(j);
            }
        }
        SupportCheck {
            low_edge: self.low_edge,
            high_edge: self.high_edge,
            probes: probes.len(),
            outside_support: outside,
            band_mismatch: mismatched,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupportCheck {
    pub low_edge: u64,
    pub high_edge: u64,
    pub probes: usize,
    /// Probed frequencies outside `[low_edge, high_edge]` with `p̂ ≠ 0`.
    pub outside_support: Vec<i64>,
    /// In-band probes where `p̂ ≠ 2ĥ`.
    pub band_mismatch: Vec<i64>,
}

impl SupportCheck {
    pub fn holds(&self) -> bool {
        self.outside_support.is_empty() && self.band_mismatch.is_empty()
    }
}

/// Band energies and the support check for one `(n, ε, a, b)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandReport {
    pub energies: BandEnergies,
    pub support: SupportCheck,
    pub checks: Vec<Check>,
}

impl BandReport {
    pub fn passed(&self) -> bool {
        ledger::all_pass(&self.checks)
    }
}

/// `ε` used when none is given: `2^{-n-3}`.
pub fn default_band_epsilon(n: u32) -> Rational {
    pow2(-(n as i64) - 3)
}

pub fn band_report(n: u32, eps: &Rational, a: &Rational, b: &Rational, tail_terms: u64, seed: u64) -> Result<BandReport> {
    let h = make_hn(n, eps, Orientation::Direct)?;
    let energies = band_tail_energies(&h, a, b, tail_terms)?;
    let truncation = energies.high_last;
    let support = BandProjection::new(h, a, b, truncation)?.support_check(256, seed);
    let checks = vec![
        Check::float_lt("low_band_energy", energies.low, energies.low_bound),
        Check::float_lt("high_band_energy", energies.high_upper, energies.high_bound),
        Check::flag("band_support", support.holds()),
    ];
    Ok(BandReport {
        energies,
        support,
        checks,
    })
}

/// Grid norms of `μ ∗ p_n` against the witness from the lower-bound
/// pipeline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandNormReport {
    pub pipeline: WitnessReport,
    pub n: u32,
    #[serde(with = "rational::serde_str")]
    pub epsilon: Rational,
    pub grid: u64,
    pub low_edge: u64,
    pub high_edge: u64,
    /// `‖h ∗ μ‖₁`, exact.
    pub h_conv_l1: f64,
    pub p_l1: f64,
    pub mu_p_l1: f64,
    pub ratio: f64,
    /// Bound on the quadrature error of each grid norm.
    pub quadrature_error: f64,
    pub phi_l2: f64,
    /// `‖h̃‖₁/‖h‖₁` on the truncated conjugate.
    pub c1: f64,
    /// `‖φ̃‖₂/‖φ‖₂`.
    pub c2: f64,
    /// `‖h ∗ μ‖₁ − ‖μ‖·‖φ‖₂`.
    pub triangle_estimate: f64,
    /// `(bound − η)/(1 + C₁ + (1 + C₂)η)`.
    pub reference: f64,
    /// `18/b + 8π²a³ ≥ η²`.
    pub band_too_wide: bool,
    pub checks: Vec<Check>,
}

impl BandNormReport {
    pub fn passed(&self) -> bool {
        ledger::all_pass(&self.checks)
    }
}

/// Values on `G` equispaced points of `Σ_j c_j e^{2πijt}` for `0 ≤ j < G`.
fn synthesize(coeffs: &[(i64, Complex64)], grid: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); grid];
    for &(j, c) in coeffs {
        buf[j.rem_euclid(grid as i64) as usize] += c;
    }
    FftPlanner::new().plan_fft_inverse(grid).process(&mut buf);
    buf
}

fn grid_l1(values: &[Complex64]) -> (f64, f64) {
    let l1 = values.iter().map(|v| v.norm()).sum::<f64>() / values.len() as f64;
    let sup = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    (l1, sup)
}

#[allow(clippy::too_many_arguments)]
pub fn band_norm_experiment(
    mu: &DyadicMeasure,
    beta: &Rational,
    alpha: &Rational,
    rho: &Rational,
    eta: &Rational,
    a: &Rational,
    b: &Rational,
) -> Result<BandNormReport> {
    let pipeline = witness_pipeline(mu, beta, alpha, rho, eta)?;
    let Some(w) = pipeline.witness.as_ref() else {
        return Err(Error::invalid("the lower-bound pipeline produced no witness (vacuous bound)"));
    };
    let (n, eps) = (w.n, w.epsilon.clone());
    // the witness convolves the mirrored measure with the reflected function
    let orientation = if w.mirrored { Orientation::Direct } else { Orientation::Reflected };
    let h = make_hn(n, &eps, orientation)?;
    let high_edge = band_high_edge(b, n);
    let grid_bits = (64 - (8 * high_edge.max(1)).leading_zeros()).max(4);
    if grid_bits > MAX_GRID_BITS {
        return Err(Error::invalid(format!(
            "band edge {high_edge} needs a grid of 2^{grid_bits} points; lower b or the measure resolution"
        )));
    }
    let grid = 1usize << grid_bits;
    let proj = BandProjection::new(h.clone(), a, b, high_edge)?;
    let low_edge = proj.low_edge;

    let p = proj.p_table();
    let mu_hat: Vec<Complex64> = parallel::install(|| {
        p.par_iter().map(|&(j, _)| coefficient(mu, j)).collect()
    });
    let mu_p: Vec<(i64, Complex64)> = p.iter().zip(&mu_hat).map(|(&(j, c), m)| (j, c * m)).collect();
    let (p_l1, p_sup) = grid_l1(&synthesize(&p, grid));
    let (mu_p_l1, mu_p_sup) = grid_l1(&synthesize(&mu_p, grid));
    let quadrature_error = PI * high_edge as f64 * p_sup.max(mu_p_sup) / grid as f64;

    let h_coeffs: Vec<(i64, Complex64)> = (-(high_edge as i64)..=high_edge as i64)
        .map(|j| (j, conjugate_coefficient(j, hn_fourier(&h, j))))
        .collect();
    let (conj_l1, _) = grid_l1(&synthesize(&h_coeffs, grid));
    let h_l1 = rational::to_f64(&h.l1());
    let c1 = conj_l1 / h_l1;

    let phi_energy = proj.phi_energy() + band_tail_energies(&h, a, b, DEFAULT_TAIL_TERMS)?.high_upper;
    let phi_l2 = phi_energy.sqrt();
    let phi = proj.phi_table(low_edge);
    let phi_conj: f64 = phi.iter().map(|(&j, &c)| conjugate_coefficient(j, c).norm_sqr()).sum();
    let phi_plain: f64 = phi.values().map(|c| c.norm_sqr()).sum();
    let c2 = if phi_plain > 0.0 { (phi_conj / phi_plain).sqrt() } else { 1.0 };

    let h_conv_l1 = rational::to_f64(&h.convolve(mu)?.l1());
    let total = rational::to_f64(&mu.total_variation());
    let triangle_estimate = h_conv_l1 - total * phi_l2;
    let etaf = rational::to_f64(eta);
    let reference = (pipeline.bound - etaf) / (1.0 + c1 + (1.0 + c2) * etaf);
    let af = rational::to_f64(a);
    let band_too_wide = 18.0 / rational::to_f64(b) + 8.0 * PI * PI * af.powi(3) >= etaf * etaf;
    let ratio = if p_l1 > 0.0 { mu_p_l1 / p_l1 } else { 0.0 };

    let checks = vec![
        Check::float_ge("band_triangle", mu_p_l1 + quadrature_error, triangle_estimate, 0.0),
        Check::recorded("band_ratio_vs_reference", format!("{ratio:.17e}"), format!("{reference:.17e}")),
        Check::recorded("band_width_warning", band_too_wide.to_string(), "false"),
    ];
    Ok(BandNormReport {
        n,
        epsilon: eps,
        grid: grid as u64,
        low_edge,
        high_edge,
        h_conv_l1,
        p_l1,
        mu_p_l1,
        ratio,
        quadrature_error,
        phi_l2,
        c1,
        c2,
        triangle_estimate,
        reference,
        band_too_wide,
        checks,
        pipeline,
    })
}
