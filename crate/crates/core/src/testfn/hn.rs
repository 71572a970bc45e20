use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::step::StepFunction;
use crate::error::{Error, Result};
use crate::measure::DyadicMeasure;
use crate::rational::{self, int, pow2, Rational};

/// Largest level accepted by [`make_hn`].
pub const MAX_LEVEL: u32 = 60;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Value `a` on `[−ε, 2^{-n-1})`, `−b` on `[2^{-n-1}, 2^{-n} − ε)`.
    #[default]
    Direct,
    /// `t ↦ h(−t)` of the direct function.
    Reflected,
}

/// Two-plateau, mean-zero step function of width `2^{-n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunctionHn {
    pub n: u32,
    pub epsilon: Rational,
    pub orientation: Orientation,
    step: StepFunction,
}

/// `h_n` for `0 < ε < 2^{-n-1}`.
pub fn make_hn(n: u32, epsilon: &Rational, orientation: Orientation) -> Result<TestFunctionHn> {
    if n > MAX_LEVEL {
        return Err(Error::invalid(format!("level {n} exceeds {MAX_LEVEL}")));
    }
    let half = pow2(-(n as i64) - 1);
    if !epsilon.is_positive() || *epsilon >= half {
        return Err(Error::invalid(format!(
            "epsilon must satisfy 0 < eps < 2^-{}, got {}",
            n + 1,
            rational::to_fraction_string(epsilon)
        )));
    }
    let jumps = direct_jumps(n, epsilon);
    let jumps: Vec<_> = match orientation {
        Orientation::Direct => jumps,
        Orientation::Reflected => jumps.into_iter().map(|(p, d)| (-p, -d)).collect(),
    };
    let step = StepFunction::from_jumps(jumps, &Rational::zero())?;
    let h = TestFunctionHn {
        n,
        epsilon: epsilon.clone(),
        orientation,
        step,
    };
    assert!(h.step.integral().is_zero());
    assert_eq!(h.step.l1(), h.l1_closed_form());
    assert_eq!(h.step.linf(), h.right_value());
    assert!(h.step.linf() <= pow2(n as i64));
    assert_eq!(h.step.support_length(), pow2(-(n as i64)));
    Ok(h)
}

/// Jumps of the direct orientation; the same three atoms form the
/// derivative measure.
fn direct_jumps(n: u32, eps: &Rational) -> Vec<(Rational, Rational)> {
    let scale = pow2(2 * n as i64);
    let half = pow2(-(n as i64) - 1);
    let a = &scale * (&half - eps);
    let b = &scale * (&half + eps);
    vec![
        (-eps.clone(), a.clone()),
        (half.clone(), -(&a + &b)),
        (pow2(-(n as i64)) - eps, b),
    ]
}

impl TestFunctionHn {
    pub fn step(&self) -> &StepFunction {
        &self.step
    }

    /// `2^{2n}(2^{-n-1} − ε)`.
    pub fn left_value(&self) -> Rational {
        pow2(2 * self.n as i64) * (pow2(-(self.n as i64) - 1) - &self.epsilon)
    }

    /// `2^{2n}(2^{-n-1} + ε)`, the sup norm.
    pub fn right_value(&self) -> Rational {
        pow2(2 * self.n as i64) * (pow2(-(self.n as i64) - 1) + &self.epsilon)
    }

    /// `½ − ε²2^{2n+1}`.
    pub fn l1_closed_form(&self) -> Rational {
        int(1) / int(2) - &self.epsilon * &self.epsilon * pow2(2 * self.n as i64 + 1)
    }

    /// `½ + ε²2^{2n+1}`, the form often quoted for this norm. It differs from
    /// the actual norm by `ε²2^{2n+2}`.
    pub fn l1_quoted_form(&self) -> Rational {
        int(1) / int(2) + &self.epsilon * &self.epsilon * pow2(2 * self.n as i64 + 1)
    }

    pub fn l1(&self) -> Rational {
        self.step.l1()
    }

    pub fn linf(&self) -> Rational {
        self.step.linf()
    }

    pub fn integral(&self) -> Rational {
        self.step.integral()
    }

    /// `‖h‖₂² = 2^{4n}[(2^{-n-1}−ε)²(2^{-n-1}+ε) + (2^{-n-1}+ε)²(2^{-n-1}−ε)]`.
    pub fn l2_squared(&self) -> Rational {
        self.step.l2_squared()
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        self.step.eval(t)
    }

    /// Atoms `(position, mass)` of the distributional derivative.
    pub fn derivative_atoms(&self) -> Vec<(Rational, Rational)> {
        self.step.jumps()
    }

    pub fn convolve(&self, mu: &DyadicMeasure) -> Result<StepFunction> {
        self.step.convolve_measure(mu)
    }
}

/// `h ∗ μ` as an exact step function.
pub fn convolve_hn(h: &TestFunctionHn, mu: &DyadicMeasure) -> Result<StepFunction> {
    h.convolve(mu)
}
