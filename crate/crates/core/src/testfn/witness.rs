use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::hn::{make_hn, Orientation};
use crate::error::{Error, Result};
use crate::ledger::{self, Check, Verdict};
use crate::martingale::{
    build_tree, c_beta_estimate, check_class_membership, classify, isolate_positive_part_at,
    mountain_river_search, river_window, select_cover, CBetaEstimate, CoverFamily, CoverOptions,
    MeasureSplit, RiverOutcome, RiverParams,
};
use crate::measure::DyadicMeasure;
use crate::rational::{self, int, pow2, Pow2, Rational};

/// Inputs of the lower-bound pipeline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessInputs {
    #[serde(with = "rational::serde_str")]
    pub beta: Rational,
    #[serde(with = "rational::serde_str")]
    pub alpha: Rational,
    #[serde(with = "rational::serde_str")]
    pub rho: Rational,
    #[serde(with = "rational::serde_str")]
    pub eta: Rational,
}

/// Everything derived once a scale `k` and a level `n` have been found.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub split: MeasureSplit,
    pub k: u32,
    pub cover: CoverFamily,
    pub river: RiverOutcome,
    pub n: u32,
    #[serde(with = "rational::serde_str")]
    pub epsilon: Rational,
    /// True when the measures were mirrored so that the descent vertices
    /// carry the larger child imbalance.
    pub mirrored: bool,
    /// `Σ_{A_n} (m(ω₀) − m(ω₁))` after orientation.
    #[serde(with = "rational::serde_str")]
    pub descent_excess: Rational,
    /// `Σ_{B_n} (m(ω₁) − m(ω₀))` after orientation.
    #[serde(with = "rational::serde_str")]
    pub ascent_excess: Rational,
    /// `Σ_{A_n} (m(ω₀) + m(ω₁))`.
    #[serde(with = "rational::serde_str")]
    pub descent_mass: Rational,
    /// Left endpoints `b_ω` (level-`n` cell indices) of the pieces
    /// `[b_ω, b_ω + ε]` of `E`.
    pub e_set_cells: Vec<u64>,
    #[serde(with = "rational::serde_str")]
    pub e_set_integral: Rational,
    #[serde(with = "rational::serde_str")]
    pub achieved: Rational,
    pub achieved_f64: f64,
    pub premise_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessReport {
    pub inputs: WitnessInputs,
    pub resolution: u32,
    pub c_beta: CBetaEstimate,
    /// `½ĉ ≤ η`: the bound carries no information and nothing is run.
    pub vacuous: bool,
    /// `2^{-6}(2^{α+1}−1)²((1−ρ)/4)²·½ĉ`.
    pub bound: f64,
    pub witness: Option<Witness>,
    /// Scales tried before the witness scale, with the reason each failed.
    pub attempts: Vec<String>,
    pub checks: Vec<Check>,
}

impl WitnessReport {
    pub fn passed(&self) -> bool {
        ledger::all_pass(&self.checks)
    }
}

/// `2^{-6}(2^{α+1}−1)²((1−ρ)/4)²·½c`.
pub fn theoretical_bound(alpha: &Rational, rho: &Rational, c: &Rational) -> f64 {
    let y = (rational::to_f64(&(alpha + int(1)))).exp2() - 1.0;
    let q = rational::to_f64(&((int(1) - rho) / int(4)));
    y * y * q * q * rational::to_f64(c) / 128.0
}

/// Largest `q·2^{-n-L}` not above `(2^{α+1}−1)(1−ρ)2^{-n-5}`, with `L`
/// chosen so that `q ≥ 1`.
pub fn choose_epsilon(alpha: &Rational, rho: &Rational, n: u32) -> Result<Rational> {
    let t = Pow2(alpha + int(1));
    for bits in [24u32, 32, 48, 64] {
        let c = (int(1) - rho) * pow2(bits as i64 - 5);
        let fits = |q: &BigInt| {
            let q = Rational::from_integer(q.clone());
            t.cmp_scaled(&(&q + &c), &c) != Ordering::Greater
        };
        let guess = ((t.approx() - 1.0) * rational::to_f64(&c)).floor().max(0.0);
        let mut q = BigInt::from(guess as u64);
        while q > BigInt::zero() && !fits(&q) {
            q -= 1;
        }
        while fits(&(&q + 1)) {
            q += 1;
        }
        if q > BigInt::zero() {
            return Ok(Rational::new(q, rational::pow2_int(n + bits)));
        }
    }
    Err(Error::invalid("epsilon underflows: alpha too close to -1 or rho too close to 1"))
}

/// `∫_E Σ_x w_x 2^n 1[x ∈ [t−ε, t+2^{-n}−ε)] dt` for a positive measure,
/// summed over the pieces `[b, b+ε]` of `E`.
fn window_mass(nu: &DyadicMeasure, pieces: &BTreeSet<u64>, n: u32, eps: &Rational) -> Rational {
    let width = pow2(-(n as i64));
    let scale = pow2(n as i64);
    let modulus = 1i128 << n;
    let mut total = Rational::zero();
    for (&cell, w) in nu.atoms() {
        let u = nu.position(cell) + eps;
        let j0: i128 = rational::floor(&(&u * &scale)).to_i128().expect("grid index");
        for j in [j0, j0 - 1] {
            if !pieces.contains(&(j.rem_euclid(modulus) as u64)) {
                continue;
            }
            let b = Rational::from_integer(j.into()) * &width;
            let lo = (&u - &width).max(b.clone());
            let hi = u.clone().min(&b + eps);
            if hi > lo {
                total += w.abs() * (hi - lo);
            }
        }
    }
    total * scale
}

fn abs_check(premise: bool, check: Check) -> Check {
    if premise || check.verdict == Verdict::Pass {
        check
    } else {
        Check {
            verdict: Verdict::Recorded,
            ..check
        }
    }
}

/// Runs the full witness construction for the lower bound on `‖h_n ∗ μ‖₁`:
/// positive-part isolation, covering family, mountain-river level, test
/// function and the term-by-term chain of inequalities.
pub fn witness_pipeline(
    mu: &DyadicMeasure,
    beta: &Rational,
    alpha: &Rational,
    rho: &Rational,
    eta: &Rational,
) -> Result<WitnessReport> {
    let params = RiverParams::new(beta.clone(), alpha.clone(), rho.clone())?;
    if !eta.is_positive() {
        return Err(Error::invalid("eta must be positive"));
    }
    let inputs = WitnessInputs {
        beta: beta.clone(),
        alpha: alpha.clone(),
        rho: rho.clone(),
        eta: eta.clone(),
    };
    let resolution = mu.resolution();
    let c_est = c_beta_estimate(mu, beta, resolution).map_err(Error::at_stage("c_beta"))?;
    let c_hat = c_est.value.clone();
    let bound = theoretical_bound(alpha, rho, &c_hat);
    let mut report = WitnessReport {
        inputs,
        resolution,
        c_beta: c_est,
        vacuous: false,
        bound,
        witness: None,
        attempts: Vec::new(),
        checks: Vec::new(),
    };
    if &c_hat / int(2) <= *eta {
        report.vacuous = true;
        report.checks.push(Check::recorded(
            "vacuous_bound",
            rational::to_fraction_string(&(&c_hat / int(2))),
            rational::to_fraction_string(eta),
        ));
        return Ok(report);
    }
    let split = isolate_positive_part_at(mu, beta, eta, resolution).map_err(Error::at_stage("isolate"))?;
    report.checks.push(Check::flag("split_invariant", split.invariant_holds(mu)));

    // Fine to coarse; the first scale with a river level and a holding
    // premise wins, otherwise the first scale with a river level.
    let mut fallback: Option<Scale> = None;
    let mut chosen: Option<Scale> = None;
    for k in (2..=resolution).rev() {
        let window = river_window(&params, k).map_err(Error::at_stage("river_window"))?;
        let margin = pow2(-(window.r as i64) + 1);
        let options = CoverOptions {
            margins: BTreeMap::from([(k, margin)]),
            c_beta: Some(c_hat.clone()),
            min_level: k,
            max_level: Some(k),
        };
        let cover = match select_cover(&split.positive_part, &split.remainder, beta, eta, &options) {
            Ok(c) => c,
            Err(Error::Cover(f)) => {
                report.attempts.push(format!("k={k}: cover: {f}"));
                continue;
            }
            Err(e) => return Err(Error::at_stage("cover")(e)),
        };
        let cells: BTreeSet<u64> = cover.cells.iter().copied().collect();
        let mu_k = split.positive_part.restrict_to_cells(k, &cells);
        let river = match mountain_river_search(&mu_k, &params, k) {
            Ok(r) => r,
            Err(Error::River(f)) => {
                report.attempts.push(format!("k={k}: river: {f}"));
                continue;
            }
            Err(e) => return Err(Error::at_stage("river")(e)),
        };
        let scale = Scale::new(k, cover, mu_k, river, alpha, rho, &c_hat)?;
        if scale.premise {
            chosen = Some(scale);
            break;
        }
        report.attempts.push(format!("k={k}: descent premise fails at n={}", scale.river.n));
        if fallback.is_none() {
            fallback = Some(scale);
        }
    }
    let Some(scale) = chosen.or(fallback) else {
        return Err(Error::NoAdmissibleScale {
            attempts: std::mem::take(&mut report.attempts),
        });
    };
    let witness = build_witness(mu, split, scale, &mut report)?;
    report.witness = Some(witness);
    Ok(report)
}

/// One admissible scale before the test function is built.
struct Scale {
    k: u32,
    cover: CoverFamily,
    mu_k: DyadicMeasure,
    river: RiverOutcome,
    mirrored: bool,
    descent: Vec<u64>,
    descent_excess: Rational,
    ascent_excess: Rational,
    premise: bool,
    premise_check: Check,
}

impl Scale {
    fn new(
        k: u32,
        cover: CoverFamily,
        mu_k: DyadicMeasure,
        river: RiverOutcome,
        alpha: &Rational,
        rho: &Rational,
        c_hat: &Rational,
    ) -> Result<Self> {
        let threshold = crate::martingale::SplitThreshold::Exponent(alpha.clone());
        let tree = build_tree(&mu_k);
        let cls = classify(&tree, river.n, &threshold)?;
        let a = cls.descent_excess(&tree);
        let b = cls.ascent_excess(&tree);
        let mirrored = b > a;
        let (mu_k, descent, d, other) = if mirrored {
            let m = mu_k.mirror_cells();
            let t = build_tree(&m);
            let c = classify(&t, river.n, &threshold)?;
            let (d, o) = (c.descent_excess(&t), c.ascent_excess(&t));
            (m, c.descent, d, o)
        } else {
            (mu_k, cls.descent, a, b)
        };
        // Σ_A (m0 − m1) > (2^{α+1} − 1)·c′ with c′ = ĉ(1−ρ)/4.
        let c_prime = c_hat * (int(1) - rho) / int(4);
        let premise = Pow2(alpha + int(1)).cmp_scaled(&(&d + &c_prime), &c_prime) == Ordering::Greater;
        let rhs = (Pow2(alpha + int(1)).approx() - 1.0) * rational::to_f64(&c_prime);
        let premise_check = Check {
            name: "descent_premise".into(),
            lhs: format!("{:.17e}", rational::to_f64(&d)),
            rhs: format!("{rhs:.17e}"),
            verdict: if premise { Verdict::Pass } else { Verdict::Recorded },
        };
        Ok(Scale {
            k,
            cover,
            mu_k,
            river,
            mirrored,
            descent,
            descent_excess: d,
            ascent_excess: other,
            premise,
            premise_check,
        })
    }
}

fn build_witness(
    mu: &DyadicMeasure,
    split: MeasureSplit,
    scale: Scale,
    report: &mut WitnessReport,
) -> Result<Witness> {
    let WitnessInputs { alpha, rho, eta, beta } = report.inputs.clone();
    let c_hat = report.c_beta.value.clone();
    let n = scale.river.n;
    let premise = scale.premise;
    let checks = &mut report.checks;

    checks.push(Check::exact_lt(
        "cover_margin_mass",
        &scale.cover.recheck_margin(&split.remainder),
        &eta,
    ));
    checks.push(Check::exact_lt(
        "cover_mass",
        &scale.cover.half_target,
        &scale.cover.recheck_nu1(&split.positive_part),
    ));
    let membership = check_class_membership(&scale.mu_k, &beta, scale.k)?;
    checks.push(Check::flag("class_membership", membership.member));
    checks.push(Check::exact_lt("river_turbulent_mass", &scale.river.turbulent_mass, &scale.river.budget));
    checks.push(Check::flag("river_identity", scale.river.identity_holds));
    checks.push(scale.premise_check.clone());

    let eps = choose_epsilon(&alpha, &rho, n).map_err(Error::at_stage("epsilon"))?;
    let h = make_hn(n, &eps, Orientation::Reflected).map_err(Error::at_stage("test_function"))?;
    let two_n = pow2(n as i64);
    let u = &eps * &two_n;
    let half = Rational::new(1.into(), 2.into());

    let signed = if split.negated { mu.negate() } else { mu.clone() };
    let (w, remainder) = if scale.mirrored {
        (signed.mirror_cells(), split.remainder.mirror_cells())
    } else {
        (signed.clone(), split.remainder.clone())
    };
    let mu_k = &scale.mu_k;

    let hw = h.convolve(&w)?;
    let achieved = hw.l1();
    if scale.mirrored {
        let direct = make_hn(n, &eps, Orientation::Direct)?;
        checks.push(Check::exact_eq(
            "mirror_consistency",
            &achieved,
            &direct.convolve(&signed)?.l1(),
        ));
    }

    let tree = build_tree(mu_k);
    let pieces: BTreeSet<u64> = scale.descent.iter().copied().collect();
    let width = pow2(-(n as i64));
    let e_integral = |g: &super::step::StepFunction| -> Rational {
        pieces
            .iter()
            .map(|&j| {
                let b = Rational::from_integer(j.into()) * &width;
                g.abs_integral_over(&b, &(&b + &eps))
            })
            .sum()
    };
    let e_w = e_integral(&hw);
    let e_k = e_integral(&h.convolve(mu_k)?);
    let t_r = window_mass(&remainder, &pieces, n, &eps);
    let t_abs = window_mass(&w.add(&mu_k.negate())?.abs(), &pieces, n, &eps);

    let mut ys = Vec::with_capacity(pieces.len());
    let mut descent_mass = Rational::zero();
    for &j in &pieces {
        let (m0, m1) = tree.children(n, j);
        ys.push((&half - &u) * &m0 - (&half + &u) * &m1);
        descent_mass += m0 + m1;
    }
    let sum_abs: Rational = ys.iter().map(|y| y.abs()).sum();
    let sum: Rational = ys.iter().sum();
    let d = &scale.descent_excess;
    let regrouped = &half * d - &u * &descent_mass;

    checks.push(Check::flag("descent_terms_positive", ys.iter().all(|y| y.is_positive())));
    checks.push(Check::exact_ge("chain_e_set", &achieved, &e_w));
    checks.push(Check::recorded(
        "chain_remainder_plus_reading",
        rational::to_fraction_string(&e_w),
        rational::to_fraction_string(&(&e_k + &t_r)),
    ));
    checks.push(Check::recorded(
        "chain_remainder_minus_reading",
        rational::to_fraction_string(&e_w),
        rational::to_fraction_string(&(&e_k - &t_r)),
    ));
    checks.push(Check::exact_ge("chain_remainder_triangle", &e_w, &(&e_k - &t_abs)));
    checks.push(Check::exact_ge("chain_window_bound", &e_k, &(&two_n * &eps * &sum_abs)));
    checks.push(Check::exact_ge("chain_sum_inside", &sum_abs, &sum.abs()));
    checks.push(Check::exact_eq("chain_regrouping", &sum, &regrouped));

    // |L| ≥ |2^{α+1}c₈ − Q| with L the regrouped sum, c₈ = ĉ(1−ρ)/8 and
    // Q = c₈ + η + ε2^nĉ.
    let c8 = &c_hat * (int(1) - &rho) / int(8);
    let q = &c8 + &eta + &u * &c_hat;
    let t = Pow2(&alpha + int(1));
    let l_abs = regrouped.abs();
    let upper = t.cmp_scaled(&(&l_abs + &q), &c8) != Ordering::Less;
    let lower = t.cmp_scaled(&(&q - &l_abs), &c8) != Ordering::Greater;
    let r_abs = (t.approx() * rational::to_f64(&c8) - rational::to_f64(&q)).abs();
    let scale_f = rational::to_f64(&(&two_n * &eps));
    checks.push(abs_check(
        premise,
        Check {
            name: "chain_premise_substitution".into(),
            lhs: format!("{:.17e}", scale_f * rational::to_f64(&l_abs)),
            rhs: format!("{:.17e}", scale_f * r_abs),
            verdict: if upper && lower { Verdict::Pass } else { Verdict::Fail },
        },
    ));
    let last = scale_f * r_abs + scale_f * rational::to_f64(&eta);
    checks.push(abs_check(
        premise,
        Check::float_ge("chain_epsilon_choice", last, report.bound, 0.0),
    ));
    let achieved_f64 = rational::to_f64(&achieved);
    checks.push(abs_check(
        premise,
        Check::float_ge("witness_bound", achieved_f64, report.bound, 0.0),
    ));

    Ok(Witness {
        split,
        k: scale.k,
        cover: scale.cover,
        river: scale.river,
        n,
        epsilon: eps,
        mirrored: scale.mirrored,
        descent_excess: scale.descent_excess,
        ascent_excess: scale.ascent_excess,
        descent_mass,
        e_set_cells: scale.descent,
        e_set_integral: e_w,
        achieved,
        achieved_f64,
        premise_holds: premise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{make_dirac, make_uniform};
    use crate::rational::frac;

    #[test]
    fn epsilon_is_largest_dyadic_below_target() {
        let (alpha, rho) = (frac(-1, 2), frac(1, 2));
        let eps = choose_epsilon(&alpha, &rho, 5).unwrap();
        let target = (2f64.sqrt() - 1.0) * 0.5 * 2f64.powi(-10);
        let e = rational::to_f64(&eps);
        assert!(e <= target && target - e <= 2f64.powi(-29));
    }

    #[test]
    fn dirac_runs_through() {
        let mu = make_dirac(&int(0), 12).unwrap();
        let r = witness_pipeline(&mu, &int(0), &frac(-1, 2), &frac(1, 2), &frac(1, 1000)).unwrap();
        assert!(!r.vacuous);
        let w = r.witness.as_ref().unwrap();
        assert!(w.premise_holds);
        // the convolution is a translate of h, so the norm is ½ − ε²2^{2n+1}
        let h = make_hn(w.n, &w.epsilon, Orientation::Reflected).unwrap();
        assert_eq!(w.achieved, h.l1());
        // 2^{-6}(√2 − 1)²(1/8)²·½
        let expected = (2f64.sqrt() - 1.0).powi(2) / 64.0 / 64.0 / 2.0;
        assert!((r.bound - expected).abs() < 1e-15);
        assert!(r.passed(), "{:?}", ledger::failures(&r.checks));
    }

    #[test]
    fn uniform_is_vacuous() {
        let mu = make_uniform(12).unwrap();
        let r = witness_pipeline(&mu, &frac(1, 4), &frac(-1, 2), &frac(3, 4), &frac(1, 1000)).unwrap();
        assert!(r.vacuous);
        assert!(r.witness.is_none());
        assert!(r.passed());
    }

    #[test]
    fn signed_sparse_measure() {
        let mu = DyadicMeasure::from_atoms(
            10,
            [(3, frac(-1, 2)), (300, frac(1, 5)), (700, frac(3, 10))],
        )
        .unwrap();
        let r = witness_pipeline(&mu, &int(0), &frac(-1, 2), &frac(1, 2), &frac(1, 1000)).unwrap();
        let w = r.witness.as_ref().unwrap();
        assert!(w.split.negated);
        assert!(r.passed(), "{:?}", ledger::failures(&r.checks));
        assert!(w.achieved_f64 >= r.bound);
    }

    #[test]
    fn window_mass_of_single_atom() {
        // atom at 0, piece starting at 0: t ∈ [0, ε] and 0 ∈ [t−ε, t+2^{-n}−ε)
        let nu = make_dirac(&int(0), 8).unwrap();
        let eps = frac(1, 1024);
        let m = window_mass(&nu, &BTreeSet::from([0]), 4, &eps);
        assert_eq!(m, pow2(4) * &eps);
    }
}
