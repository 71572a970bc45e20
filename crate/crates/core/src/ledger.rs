//! Named inequality checks collected by experiments and reports.

use serde::{Deserialize, Serialize};

use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Computed and reported, but not an assertion.
    Recorded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: String,
    pub rhs: String,
    pub verdict: Verdict,
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

impl Check {
    pub fn exact_ge(name: impl Into<String>, lhs: &Rational, rhs: &Rational) -> Self {
        Check {
            name: name.into(),
            lhs: rational::to_fraction_string(lhs),
            rhs: rational::to_fraction_string(rhs),
            verdict: verdict(lhs >= rhs),
        }
    }

    pub fn exact_le(name: impl Into<String>, lhs: &Rational, rhs: &Rational) -> Self {
        Check {
            name: name.into(),
            lhs: rational::to_fraction_string(lhs),
            rhs: rational::to_fraction_string(rhs),
            verdict: verdict(lhs <= rhs),
        }
    }

    pub fn exact_lt(name: impl Into<String>, lhs: &Rational, rhs: &Rational) -> Self {
        Check {
            name: name.into(),
            lhs: rational::to_fraction_string(lhs),
            rhs: rational::to_fraction_string(rhs),
            verdict: verdict(lhs < rhs),
        }
    }

    pub fn exact_eq(name: impl Into<String>, lhs: &Rational, rhs: &Rational) -> Self {
        Check {
            name: name.into(),
            lhs: rational::to_fraction_string(lhs),
            rhs: rational::to_fraction_string(rhs),
            verdict: verdict(lhs == rhs),
        }
    }

    /// `lhs ≥ rhs − tol`.
    pub fn float_ge(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            lhs: fmt_f64(lhs),
            rhs: fmt_f64(rhs),
            verdict: verdict(lhs >= rhs - tol),
        }
    }

    /// `lhs < rhs`.
    pub fn float_lt(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Check {
            name: name.into(),
            lhs: fmt_f64(lhs),
            rhs: fmt_f64(rhs),
            verdict: verdict(lhs < rhs),
        }
    }

    /// `|lhs − rhs| ≤ tol`.
    pub fn float_close(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            lhs: fmt_f64(lhs),
            rhs: fmt_f64(rhs),
            verdict: verdict((lhs - rhs).abs() <= tol),
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            lhs: ok.to_string(),
            rhs: "true".into(),
            verdict: verdict(ok),
        }
    }

    pub fn recorded(name: impl Into<String>, lhs: impl Into<String>, rhs: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            lhs: lhs.into(),
            rhs: rhs.into(),
            verdict: Verdict::Recorded,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(Check::passed)
}

/// Names of the failing checks.
pub fn failures(checks: &[Check]) -> Vec<&str> {
    checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.name.as_str())
        .collect()
}
