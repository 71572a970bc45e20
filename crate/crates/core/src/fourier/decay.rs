use serde::Serialize;

use super::fourier_stieltjes;
use crate::error::{Error, Result};
use crate::ledger::{self, Check};
use crate::measure::DyadicMeasure;
use crate::rational::{self, Rational};
use crate::testfn::witness_pipeline;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayRow {
    pub m: u32,
    pub support: usize,
    /// `max_{1≤|n|≤N} |μ̂^{∗m}(n)|`.
    pub sup_abs: f64,
    pub sup_at: i64,
    pub c_beta: f64,
    pub vacuous: bool,
    /// Lower bound certified by a passing witness run, 0 otherwise.
    pub bound: f64,
    pub achieved: Option<f64>,
    pub witness_level: Option<u32>,
    pub pipeline_passed: bool,
    pub pipeline_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub window: i64,
    pub rows: Vec<DecayRow>,
    pub sup_strictly_decreasing: bool,
    /// Every row's bound is at least half of the first row's bound.
    pub bound_floor_holds: bool,
    pub checks: Vec<Check>,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        ledger::all_pass(&self.checks)
    }
}

/// For `m = 1..m_max`, contrasts the decay of `sup |μ̂^{∗m}|` away from 0
/// with the witness lower bound for `μ^{∗m}`.
pub fn spectral_decay_experiment(
    mu: &DyadicMeasure,
    m_max: u32,
    window: i64,
    beta: &Rational,
    alpha: &Rational,
    rho: &Rational,
    eta: &Rational,
) -> Result<DecayReport> {
    if m_max == 0 {
        return Err(Error::invalid("m_max must be at least 1"));
    }
    if window < 1 {
        return Err(Error::invalid("window must be at least 1"));
    }
    let mut rows = Vec::new();
    let mut power = mu.clone();
    for m in 1..=m_max {
        if m > 1 {
            power = power.convolve(mu)?;
        }
        let (sup_abs, sup_at) = fourier_stieltjes(&power, window)?.sup_abs_nonzero();
        let (c_beta, vacuous, bound, achieved, witness_level, passed, err) =
            match witness_pipeline(&power, beta, alpha, rho, eta) {
                Ok(r) => {
                    let passed = r.passed() && !r.vacuous && r.witness.is_some();
                    (
                        rational::to_f64(&r.c_beta.value),
                        r.vacuous,
                        if passed { r.bound } else { 0.0 },
                        r.witness.as_ref().map(|w| w.achieved_f64),
                        r.witness.as_ref().map(|w| w.n),
                        passed,
                        None,
                    )
                }
                Err(e) if matches!(e, Error::InvalidInput(_)) && m == 1 => return Err(e),
                Err(e) => (0.0, false, 0.0, None, None, false, Some(e.to_string())),
            };
        rows.push(DecayRow {
            m,
            support: power.support_size(),
            sup_abs,
            sup_at,
            c_beta,
            vacuous,
            bound,
            achieved,
            witness_level,
            pipeline_passed: passed,
            pipeline_error: err,
        });
    }
    let sup_strictly_decreasing = rows.windows(2).all(|w| w[1].sup_abs < w[0].sup_abs);
    let floor = rows[0].bound * 0.5;
    let bound_floor_holds = rows[0].bound > 0.0 && rows.iter().all(|r| r.bound >= floor);
    let checks = vec![
        Check::flag("sup_strictly_decreasing", sup_strictly_decreasing),
        Check::flag("bound_floor", bound_floor_holds),
    ];
    Ok(DecayReport {
        window,
        rows,
        sup_strictly_decreasing,
        bound_floor_holds,
        checks,
    })
}
