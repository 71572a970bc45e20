use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::{lorentz_norm, walsh_coeffs, WalshExpansion, MAX_WALSH_LEVEL};
use crate::error::{Error, Result};
use crate::ledger::{self, Check};
use crate::martingale::{build_tree, c_beta_estimate, classify, SplitThreshold};
use crate::measure::DyadicMeasure;
use crate::parallel;
use crate::rational::{self, floor_pow2, frac, int, Rational};
use crate::testfn::theoretical_bound;

/// `G_λ(μ, n)`: the `⌊2^{λn}⌋` largest `|μ̂(A)|` with `max A = n`.
pub fn g_lambda(e: &WalshExpansion, n: u32, lambda: &Rational) -> Result<Rational> {
    check_lambda_open(lambda)?;
    let count = floor_pow2(&(lambda * int(n as i64)));
    Ok(lorentz_norm(e.group(n)?, count))
}

fn check_lambda_open(lambda: &Rational) -> Result<()> {
    if !lambda.is_positive() || *lambda > int(1) {
        return Err(Error::invalid("lambda must lie in (0, 1]"));
    }
    Ok(())
}

/// `m(ω₀) − m(ω₁)` at level `n`, nonzero entries only. At or past the
/// resolution every atom sits in a left child.
pub(super) fn haar_sparse(mu: &DyadicMeasure, n: u32) -> BTreeMap<u64, Rational> {
    if n >= mu.resolution() {
        return mu.level_masses(mu.resolution())
            .into_iter()
            .map(|(c, m)| (c << (n - mu.resolution()), m))
            .collect();
    }
    let mut out: BTreeMap<u64, Rational> = BTreeMap::new();
    for (child, m) in mu.level_masses(n + 1) {
        let slot = out.entry(child >> 1).or_insert_with(Rational::zero);
        if child & 1 == 0 {
            *slot += m;
        } else {
            *slot -= m;
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn sparse_lorentz(values: &BTreeMap<u64, Rational>, k: u64) -> Rational {
    let v: Vec<Rational> = values.values().cloned().collect();
    lorentz_norm(&v, k)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LorentzOptions {
    #[serde(with = "rational::serde_str")]
    pub beta: Rational,
    #[serde(with = "rational::serde_str")]
    pub lambda: Rational,
    pub level_lo: u32,
    pub level_hi: u32,
    /// Multiplies `ĉ_β` to form the threshold.
    pub theta_c: f64,
    #[serde(with = "rational::serde_str")]
    pub eta: Rational,
}

/// `2^{-6}(2^{α+1}−1)²((1−ρ)/4)²·½` at `α = −¾`, `ρ = ¾`.
pub fn default_theta_c() -> f64 {
    theoretical_bound(&frac(-3, 4), &frac(3, 4), &int(1))
}

impl LorentzOptions {
    pub fn new(beta: Rational, lambda: Rational, level_lo: u32, level_hi: u32) -> Self {
        LorentzOptions {
            beta,
            lambda,
            level_lo,
            level_hi,
            theta_c: default_theta_c(),
            eta: frac(1, 1000),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelStat {
    pub n: u32,
    pub count: u64,
    /// `‖(c_j)_{2^n ≤ j < 2^{n+1}}‖_{W(count)}`.
    #[serde(with = "rational::serde_str")]
    pub haar: Rational,
    /// Same with the index range `2^n < j ≤ 2^{n+1}`.
    #[serde(with = "rational::serde_str")]
    pub haar_shifted: Rational,
    /// `‖(μ̂(A))_{max A = n+1}‖_{W(count)}`.
    #[serde(with = "rational::serde_str")]
    pub walsh: Rational,
    /// `G_λ(μ, n)`, the group `max A = n` (absent at `n = 0`).
    #[serde(with = "rational::serde_str::option")]
    pub g_lambda: Option<Rational>,
    pub exceeds_threshold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LorentzStats {
    pub options: LorentzOptions,
    #[serde(with = "rational::serde_str")]
    pub c_beta: Rational,
    pub threshold: f64,
    pub vacuous: bool,
    pub levels: Vec<LevelStat>,
    pub exceeding: usize,
    pub checks: Vec<Check>,
}

impl LorentzStats {
    pub fn passed(&self) -> bool {
        ledger::all_pass(&self.checks)
    }
}

pub fn lorentz_level_statistic(mu: &DyadicMeasure, opts: &LorentzOptions) -> Result<LorentzStats> {
    let LorentzOptions { beta, lambda, level_lo, level_hi, .. } = opts;
    if beta.is_negative() || *beta >= int(1) {
        return Err(Error::invalid("beta must lie in [0, 1)"));
    }
    check_lambda_open(lambda)?;
    let cap = (beta / (int(1) - beta)).min(int(1));
    if *lambda >= cap {
        return Err(Error::invalid(format!(
            "lambda must be below min(1, beta/(1-beta)) = {}",
            rational::to_fraction_string(&cap)
        )));
    }
    if level_lo > level_hi {
        return Err(Error::invalid("empty level range"));
    }
    if *level_hi >= mu.resolution() || level_hi + 1 > MAX_WALSH_LEVEL {
        return Err(Error::invalid(format!(
            "top level {level_hi} needs level {} below the resolution {} and the cap {MAX_WALSH_LEVEL}",
            level_hi + 1,
            mu.resolution()
        )));
    }
    let c_beta = c_beta_estimate(mu, beta, mu.resolution())?.value;
    let vacuous = c_beta.clone() * frac(1, 2) <= opts.eta;
    let threshold = opts.theta_c * rational::to_f64(&c_beta);
    let expansion = walsh_coeffs(mu, level_hi + 1)?;

    let levels: Vec<LevelStat> = parallel::install(|| {
        (*level_lo..=*level_hi)
            .into_par_iter()
            .map(|n| -> Result<LevelStat> {
                let count = floor_pow2(&(lambda * int(n as i64)));
                let here = haar_sparse(mu, n);
                let haar = sparse_lorentz(&here, count);
                let mut shifted = here.clone();
                shifted.remove(&0);
                if let Some(v) = haar_sparse(mu, n + 1).remove(&0) {
                    shifted.insert(1u64 << n, v);
                }
                let walsh = lorentz_norm(expansion.group(n + 1)?, count);
                let g = if n == 0 { None } else { Some(lorentz_norm(expansion.group(n)?, count)) };
                Ok(LevelStat {
                    n,
                    count,
                    exceeds_threshold: rational::to_f64(&haar) >= threshold && !vacuous,
                    haar,
                    haar_shifted: sparse_lorentz(&shifted, count),
                    walsh,
                    g_lambda: g,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut checks: Vec<Check> = levels
        .iter()
        .map(|l| Check::exact_ge(format!("walsh_dominates_haar_{}", l.n), &l.walsh, &l.haar))
        .collect();
    let exceeding = levels.iter().filter(|l| l.exceeds_threshold).count();
    checks.push(Check::recorded(
        "levels_over_threshold",
        exceeding.to_string(),
        format!("{} levels, threshold {threshold:.6e}", levels.len()),
    ));
    if vacuous {
        checks.push(Check::recorded(
            "vacuous_bound",
            rational::to_fraction_string(&c_beta),
            "half of c_beta is at most eta",
        ));
    }
    Ok(LorentzStats {
        options: opts.clone(),
        c_beta,
        threshold,
        vacuous,
        levels,
        exceeding,
        checks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TurbulenceLevel {
    pub n: u32,
    /// `Σ_{F_n ∖ Ξ_n} |m(ω)|`.
    #[serde(with = "rational::serde_str")]
    pub s1: Rational,
    /// `Σ_{F_n, m(ω)≠0} |m(ω₀) − m(ω₁)|`.
    #[serde(with = "rational::serde_str")]
    pub s2: Rational,
    /// `‖(c_j)_{2^{n−1} ≤ j < 2^n}‖_{W(⌊2^{βn}⌋)}`.
    #[serde(with = "rational::serde_str")]
    pub s3: Rational,
    /// `‖(μ̂(A))_{max A = n}‖_{W(⌊2^{βn}⌋)}`.
    #[serde(with = "rational::serde_str")]
    pub s4: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TurbulenceAggregates {
    pub k: u32,
    pub lo: u32,
    #[serde(with = "rational::serde_str")]
    pub beta: Rational,
    #[serde(with = "rational::serde_str")]
    pub beta_prime: Rational,
    #[serde(with = "rational::serde_str")]
    pub c_beta: Rational,
    pub levels: Vec<TurbulenceLevel>,
    #[serde(with = "rational::serde_str::vec")]
    pub totals: Vec<Rational>,
    /// `S_i / (β′k·ĉ_β)`, absent when the scale is 0.
    pub ratios: Option<[f64; 4]>,
    pub checks: Vec<Check>,
}

impl TurbulenceAggregates {
    pub fn passed(&self) -> bool {
        ledger::all_pass(&self.checks)
    }
}

/// The four level sums over `n ∈ [⌈(1−β′)k⌉, k]`, with turbulence measured
/// against `2^α`.
pub fn turbulence_aggregates(
    mu: &DyadicMeasure,
    beta: &Rational,
    beta_prime: &Rational,
    alpha: &Rational,
    k: u32,
) -> Result<TurbulenceAggregates> {
    if !beta_prime.is_positive() || *beta_prime >= int(1) {
        return Err(Error::invalid("beta' must lie in (0, 1)"));
    }
    if beta.is_negative() || *beta >= int(1) {
        return Err(Error::invalid("beta must lie in [0, 1)"));
    }
    if k == 0 || k > mu.resolution() || k > MAX_WALSH_LEVEL {
        return Err(Error::invalid(format!(
            "k must lie in 1..={}",
            mu.resolution().min(MAX_WALSH_LEVEL)
        )));
    }
    let threshold = SplitThreshold::exponent(alpha.clone())?;
    let lo = rational::ceil(&((int(1) - beta_prime) * int(k as i64)))
        .try_into()
        .unwrap_or(k)
        .max(1u32);
    let tree = build_tree(mu);
    let expansion = walsh_coeffs(mu, k)?;
    let c_beta = c_beta_estimate(mu, beta, mu.resolution())?.value;

    let mut levels = Vec::new();
    for n in lo..=k {
        let variation: Rational = mu.level_variation(n).values().sum();
        let turbulent: Rational = if n < tree.depth() {
            classify(&tree, n, &threshold)?
                .turbulent
                .iter()
                .map(|&c| tree.mass(n, c).abs())
                .sum()
        } else {
            Rational::zero()
        };
        let count = floor_pow2(&(beta * int(n as i64)));
        levels.push(TurbulenceLevel {
            n,
            s1: variation - turbulent,
            s2: haar_sparse(mu, n).values().map(|v| v.abs()).sum(),
            s3: sparse_lorentz(&haar_sparse(mu, n - 1), count),
            s4: lorentz_norm(expansion.group(n)?, count),
        });
    }
    let totals: Vec<Rational> = (0..4)
        .map(|i| {
            levels
                .iter()
                .map(|l| [&l.s1, &l.s2, &l.s3, &l.s4][i].clone())
                .sum()
        })
        .collect();
    let scale = beta_prime * int(k as i64) * &c_beta;
    let ratios = (!scale.is_zero()).then(|| {
        let s = rational::to_f64(&scale);
        [0, 1, 2, 3].map(|i| rational::to_f64(&totals[i]) / s)
    });
    let mut checks: Vec<Check> = levels
        .iter()
        .map(|l| Check::exact_le(format!("haar_below_walsh_{}", l.n), &l.s3, &l.s4))
        .collect();
    checks.push(Check::exact_le("s3_below_s4", &totals[2], &totals[3]));
    for (i, name) in ["s1_ratio", "s2_ratio", "s3_ratio", "s4_ratio"].iter().enumerate() {
        checks.push(Check::recorded(
            *name,
            rational::to_fraction_string(&totals[i]),
            rational::to_fraction_string(&scale),
        ));
    }
    Ok(TurbulenceAggregates {
        k,
        lo,
        beta: beta.clone(),
        beta_prime: beta_prime.clone(),
        c_beta,
        levels,
        totals,
        ratios,
        checks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DimensionMode {
    /// Series `‖(μ̂(A))_{max A=n+1}‖_{W(2^{λn})}` over `n`; a vanishing limit
    /// would give `dim > λ/(λ+1)`.
    Lambda {
        #[serde(with = "rational::serde_str")]
        lambda: Rational,
    },
    /// Series `(1/k) Σ_{n=(1−β′)k}^{k} ‖(μ̂(A))_{max A=n}‖_{W(2^{βn})}` over
    /// `k`; a vanishing liminf would give `dim > β`.
    Averaged {
        #[serde(with = "rational::serde_str")]
        beta: Rational,
        #[serde(with = "rational::serde_str")]
        beta_prime: Rational,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionVerdict {
    pub mode: DimensionMode,
    pub note: String,
    pub series: Vec<(u32, f64)>,
    /// Least-squares slope of `log2` of the positive entries against the index.
    pub log2_slope: Option<f64>,
    pub first: f64,
    pub last: f64,
    /// The series looks like it tends to 0 on the sampled range.
    pub vanishing: bool,
    /// Dimension lower bound suggested when `vanishing`.
    pub implied_bound: Option<f64>,
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Finite-scale trend of the statistic behind the Minkowski dimension lower bounds over
/// `lo..=hi`. This is a diagnostic, not a certificate.
pub fn dimension_bound_check(
    mu: &DyadicMeasure,
    mode: &DimensionMode,
    lo: u32,
    hi: u32,
    zero_tol: f64,
) -> Result<DimensionVerdict> {
    if lo > hi {
        return Err(Error::invalid("empty level range"));
    }
    let (series, bound) = match mode {
        DimensionMode::Lambda { lambda } => {
            check_lambda_open(lambda)?;
            if hi + 1 > mu.resolution().min(MAX_WALSH_LEVEL) {
                return Err(Error::invalid("level range exceeds the available Walsh groups"));
            }
            let e = walsh_coeffs(mu, hi + 1)?;
            let s = (lo..=hi)
                .map(|n| {
                    let c = floor_pow2(&(lambda * int(n as i64)));
                    Ok((n, rational::to_f64(&lorentz_norm(e.group(n + 1)?, c))))
                })
                .collect::<Result<Vec<_>>>()?;
            let l = rational::to_f64(lambda);
            (s, l / (l + 1.0))
        }
        DimensionMode::Averaged { beta, beta_prime } => {
            let alpha = frac(-1, 2);
            let s = (lo.max(1)..=hi)
                .map(|k| {
                    let r = turbulence_aggregates(mu, beta, beta_prime, &alpha, k)?;
                    Ok((k, rational::to_f64(&r.totals[3]) / k as f64))
                })
                .collect::<Result<Vec<_>>>()?;
            (s, rational::to_f64(beta))
        }
    };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(_, v)| *v > zero_tol)
        .map(|&(n, v)| (n as f64, v.log2()))
        .collect();
    let log2_slope = slope(&pts);
    let first = series.first().map_or(0.0, |p| p.1);
    let last = series.last().map_or(0.0, |p| p.1);
    let peak = series.iter().map(|p| p.1).fold(0.0, f64::max);
    let vanishing = last <= zero_tol || (log2_slope.is_some_and(|s| s < 0.0) && last < 0.5 * peak);
    Ok(DimensionVerdict {
        mode: mode.clone(),
        note: "finite-scale diagnostic over the sampled levels; not a proof".into(),
        series,
        log2_slope,
        first,
        last,
        vanishing,
        implied_bound: vanishing.then_some(bound),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{alternating_pattern, make_cantor, make_dirac, make_uniform};

    #[test]
    fn g_lambda_of_basic_measures() {
        let d = walsh_coeffs(&make_dirac(&int(0), 12).unwrap(), 12).unwrap();
        for n in 1..=12 {
            let g = g_lambda(&d, n, &frac(1, 2)).unwrap();
            // the group has 2^{n-1} ones, and ⌊2^{n/2}⌋ ≤ 2^{n-1} once n ≥ 2
            let expected = floor_pow2(&frac(n as i64, 2)).min(1 << (n - 1));
            assert_eq!(g, int(expected as i64), "n={n}");
        }
        let u = walsh_coeffs(&make_uniform(8).unwrap(), 8).unwrap();
        assert!(g_lambda(&u, 5, &frac(1, 2)).unwrap().is_zero());
        assert!(g_lambda(&u, 5, &int(0)).is_err());
    }

    #[test]
    fn lorentz_stat_dirac_and_uniform() {
        let opts = LorentzOptions::new(frac(1, 2), frac(1, 2), 1, 8);
        let d = lorentz_level_statistic(&make_dirac(&int(0), 10).unwrap(), &opts).unwrap();
        assert!(d.levels.iter().all(|l| l.haar == int(1)));
        assert!(d.passed());
        assert_eq!(d.exceeding, 8);
        // at resolution 18, ĉ_β = 2^{-9} and half of it is below η = 10^{-3}
        let u = lorentz_level_statistic(&make_uniform(18).unwrap(), &opts).unwrap();
        assert!(u.levels.iter().all(|l| l.haar.is_zero() && l.walsh.is_zero()));
        assert!(u.vacuous);
        assert_eq!(u.exceeding, 0);
        let bad = LorentzOptions::new(frac(1, 3), frac(1, 2), 1, 8);
        assert!(lorentz_level_statistic(&make_uniform(10).unwrap(), &bad).is_err());
    }

    #[test]
    fn lorentz_stat_cantor_levels() {
        let mu = make_cantor(&alternating_pattern(), 24).unwrap();
        let opts = LorentzOptions::new(frac(11, 20), frac(1, 2), 4, 11);
        let r = lorentz_level_statistic(&mu, &opts).unwrap();
        assert!(r.passed());
        // levels that split evenly carry no Haar mass, the others carry all of it
        assert!(r.exceeding >= 4, "{:?}", r.levels);
    }

    #[test]
    fn turbulence_aggregates_dirac() {
        let mu = make_dirac(&int(0), 16).unwrap();
        let r = turbulence_aggregates(&mu, &frac(1, 2), &frac(1, 2), &frac(-1, 2), 12).unwrap();
        assert_eq!(r.lo, 6);
        assert_eq!(r.totals[1], int(7));
        assert!(r.passed());
        let u = turbulence_aggregates(&make_uniform(12).unwrap(), &frac(1, 2), &frac(1, 2), &frac(-1, 2), 11).unwrap();
        assert!(u.totals[1].is_zero());
    }

    #[test]
    fn dimension_diagnostics() {
        let lambda = DimensionMode::Lambda { lambda: frac(1, 2) };
        let u = dimension_bound_check(&make_uniform(12).unwrap(), &lambda, 1, 10, 1e-12).unwrap();
        assert!(u.vanishing);
        assert_eq!(u.implied_bound, Some(1.0 / 3.0));
        let d = dimension_bound_check(&make_dirac(&int(0), 12).unwrap(), &lambda, 2, 10, 1e-12).unwrap();
        assert!(!d.vanishing);
        assert!(d.implied_bound.is_none());
    }
}
