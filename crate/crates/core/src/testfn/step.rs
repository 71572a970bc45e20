use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::measure::DyadicMeasure;
use crate::rational::{self, int, Rational};

/// Piecewise constant function on the circle `[0, 1)`.
///
/// `pieces[i] = (start, value)`: the value holds on `[start, next start)`.
/// The first piece starts at 0 and consecutive values differ.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    pieces: Vec<(Rational, Rational)>,
}

impl StepFunction {
    pub fn constant(value: Rational) -> Self {
        StepFunction {
            pieces: vec![(Rational::zero(), value)],
        }
    }

    /// Builds the periodic step function with the given jumps (positions are
    /// reduced mod 1) and total integral. The jumps must sum to zero.
    pub fn from_jumps<I>(jumps: I, integral: &Rational) -> Result<Self>
    where
        I: IntoIterator<Item = (Rational, Rational)>,
    {
        let mut at: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (p, d) in jumps {
            if d.is_zero() {
                continue;
            }
            *at.entry(rational::frac_part(&p)).or_insert_with(Rational::zero) += d;
        }
        at.retain(|_, d| !d.is_zero());
        let total: Rational = at.values().sum();
        if !total.is_zero() {
            return Err(Error::invalid("jumps of a periodic step function must sum to zero"));
        }
        let one = int(1);
        // f = c + Σ_{p ≤ t} d_p on [0,1), so ∫f = c + Σ d_p (1 − p).
        let tail: Rational = at.iter().map(|(p, d)| d * (&one - p)).sum();
        let mut value = integral - tail;
        let mut pieces: Vec<(Rational, Rational)> = Vec::with_capacity(at.len() + 1);
        if !at.contains_key(&Rational::zero()) {
            pieces.push((Rational::zero(), value.clone()));
        }
        for (p, d) in at {
            value += d;
            pieces.push((p, value.clone()));
        }
        Ok(StepFunction { pieces })
    }

    pub fn pieces(&self) -> &[(Rational, Rational)] {
        &self.pieces
    }

    fn end_of(&self, i: usize) -> Rational {
        self.pieces
            .get(i + 1)
            .map(|(s, _)| s.clone())
            .unwrap_or_else(|| int(1))
    }

    /// Jumps `(position, f(p) − f(p⁻))`, including the wrap-around at 0.
    pub fn jumps(&self) -> Vec<(Rational, Rational)> {
        let last = self.pieces.last().expect("non-empty").1.clone();
        let mut prev = last;
        let mut out = Vec::new();
        for (s, v) in &self.pieces {
            let d = v - &prev;
            if !d.is_zero() {
                out.push((s.clone(), d));
            }
            prev = v.clone();
        }
        out
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        let t = rational::frac_part(t);
        let idx = self.pieces.partition_point(|(s, _)| *s <= t);
        self.pieces[idx - 1].1.clone()
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        let t = t.rem_euclid(1.0);
        let idx = self
            .pieces
            .partition_point(|(s, _)| rational::to_f64(s) <= t);
        rational::to_f64(&self.pieces[idx.max(1) - 1].1)
    }

    pub fn integral(&self) -> Rational {
        (0..self.pieces.len())
            .map(|i| &self.pieces[i].1 * (self.end_of(i) - &self.pieces[i].0))
            .sum()
    }

    pub fn l1(&self) -> Rational {
        (0..self.pieces.len())
            .map(|i| self.pieces[i].1.abs() * (self.end_of(i) - &self.pieces[i].0))
            .sum()
    }

    pub fn linf(&self) -> Rational {
        self.pieces
            .iter()
            .map(|(_, v)| v.abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// `∫ f²`.
    pub fn l2_squared(&self) -> Rational {
        (0..self.pieces.len())
            .map(|i| &self.pieces[i].1 * &self.pieces[i].1 * (self.end_of(i) - &self.pieces[i].0))
            .sum()
    }

    /// Measure of `{f ≠ 0}`.
    pub fn support_length(&self) -> Rational {
        (0..self.pieces.len())
            .filter(|&i| !self.pieces[i].1.is_zero())
            .map(|i| self.end_of(i) - &self.pieces[i].0)
            .sum()
    }

    /// `∫_{[lo, hi]} |f|` over an arc of length at most 1 (taken mod 1).
    pub fn abs_integral_over(&self, lo: &Rational, hi: &Rational) -> Rational {
        let len = hi - lo;
        if !len.is_positive() {
            return Rational::zero();
        }
        if len >= int(1) {
            return self.l1();
        }
        let a = rational::frac_part(lo);
        let b = &a + len;
        let one = int(1);
        if b <= one {
            self.abs_integral_plain(&a, &b)
        } else {
            self.abs_integral_plain(&a, &one) + self.abs_integral_plain(&Rational::zero(), &(b - one))
        }
    }

    fn abs_integral_plain(&self, a: &Rational, b: &Rational) -> Rational {
        let mut idx = self.pieces.partition_point(|(s, _)| s <= a) - 1;
        let mut total = Rational::zero();
        while idx < self.pieces.len() {
            let start = (&self.pieces[idx].0).max(a).clone();
            let end = self.end_of(idx).min(b.clone());
            if start >= *b {
                break;
            }
            if end > start {
                total += self.pieces[idx].1.abs() * (end - start);
            }
            idx += 1;
        }
        total
    }

    /// `f ∗ μ (t) = Σ_x w_x f(t − x)`.
    pub fn convolve_measure(&self, mu: &DyadicMeasure) -> Result<StepFunction> {
        let jumps = self.jumps();
        let mut shifted = Vec::with_capacity(jumps.len() * mu.support_size());
        for (&cell, w) in mu.atoms() {
            let x = mu.position(cell);
            for (p, d) in &jumps {
                shifted.push((p + &x, d * w));
            }
        }
        StepFunction::from_jumps(shifted, &(self.integral() * mu.total_mass()))
    }

    /// Midpoint Riemann sum of `|f|` on `2^k` points.
    pub fn riemann_l1(&self, k: u32) -> f64 {
        let n = 1u64 << k;
        let h = 1.0 / n as f64;
        let mut sum = 0.0;
        let mut idx = 0usize;
        let starts: Vec<f64> = self.pieces.iter().map(|(s, _)| rational::to_f64(s)).collect();
        let values: Vec<f64> = self.pieces.iter().map(|(_, v)| rational::to_f64(v).abs()).collect();
        for i in 0..n {
            let t = (i as f64 + 0.5) * h;
            while idx + 1 < starts.len() && starts[idx + 1] <= t {
                idx += 1;
            }
            sum += values[idx];
        }
        sum * h
    }

    /// Total variation over one period, `Σ |jumps|`.
    pub fn variation(&self) -> Rational {
        self.jumps().iter().map(|(_, d)| d.abs()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::frac;

    fn sample() -> StepFunction {
        // 2 on [0,1/4), -1 on [1/4,3/4), 0 on [3/4,1)
        StepFunction::from_jumps(
            [(frac(1, 4), int(-3)), (frac(3, 4), int(1)), (int(0), int(2))],
            &frac(0, 1),
        )
        .unwrap()
    }

    #[test]
    fn builds_from_jumps() {
        let f = sample();
        assert_eq!(f.eval(&frac(1, 8)), int(2));
        assert_eq!(f.eval(&frac(1, 2)), int(-1));
        assert_eq!(f.eval(&frac(7, 8)), int(0));
        assert_eq!(f.integral(), int(0));
        assert_eq!(f.l1(), int(1));
        assert_eq!(f.linf(), int(2));
        assert_eq!(f.variation(), int(6));
    }

    #[test]
    fn arc_integrals_wrap() {
        let f = sample();
        assert_eq!(f.abs_integral_over(&frac(-1, 8), &frac(1, 8)), frac(1, 4));
        assert_eq!(f.abs_integral_over(&frac(1, 8), &frac(3, 8)), frac(3, 8));
        assert_eq!(f.abs_integral_over(&int(0), &int(1)), f.l1());
    }

    #[test]
    fn unbalanced_jumps_rejected() {
        assert!(StepFunction::from_jumps([(frac(1, 2), int(1))], &int(0)).is_err());
    }

    #[test]
    fn convolution_with_dirac_translates() {
        let f = sample();
        let d = crate::measure::make_dirac(&frac(1, 4), 3).unwrap();
        let g = f.convolve_measure(&d).unwrap();
        assert_eq!(g.eval(&frac(3, 8)), int(2));
        assert_eq!(g.l1(), f.l1());
    }

    #[test]
    fn riemann_sum_close_to_exact() {
        let f = sample();
        assert!((f.riemann_l1(12) - rational::to_f64(&f.l1())).abs() < 1e-12);
    }
}
