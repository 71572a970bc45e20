//! Acceptance suite. Each criterion prints one PASS/FAIL line; the test
//! fails at the end if any criterion failed.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dyadic_spectra::fourier::{self, level_set, range_closure_report, riesz_exact_coeffs, spectral_decay_experiment};
use dyadic_spectra::martingale::{c_beta_estimate, mountain_river_search, RiverParams};
use dyadic_spectra::measure::{alternating_pattern, make_cantor, make_sparse, random_class_member, square_cells};
use dyadic_spectra::rational::{frac, int, pow2, to_f64, Rational};
use dyadic_spectra::testfn::{band_report, make_hn, witness_pipeline, Orientation, StepFunction, DEFAULT_TAIL_TERMS};
use dyadic_spectra::walsh::{haar_coeffs, lorentz_norm, parseval_sides, walsh_coeffs, walsh_haar_matrix};
use dyadic_spectra::DyadicMeasure;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(failures: Vec<String>, summary: String) -> Outcome {
    Outcome {
        ok: failures.is_empty(),
        detail: if failures.is_empty() {
            summary
        } else {
            format!("{summary}; failed: {}", failures.join(", "))
        },
    }
}

fn run(id: u32, title: &str, limit: Duration, f: impl FnOnce() -> Outcome, lines: &mut Vec<(bool, String)>) {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    if elapsed >= limit {
        out.ok = false;
        out.detail = format!("{}; runtime {:?} over {:?}", out.detail, elapsed, limit);
    }
    let line = format!(
        "{} criterion {id} {title}: {} [{:.3}s]",
        if out.ok { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64()
    );
    println!("{line}");
    lines.push((out.ok, line));
}

/// Coefficients of `∏_{k=1}^{kmax}(1 + ½z^{3^k} + ½z^{-3^k})` by direct multiplication.
fn riesz_oracle(kmax: u32) -> BTreeMap<i64, Rational> {
    let mut poly: BTreeMap<i64, Rational> = BTreeMap::from([(0, int(1))]);
    for k in 1..=kmax {
        let p = 3i64.pow(k);
        let mut next: BTreeMap<i64, Rational> = BTreeMap::new();
        for (n, c) in &poly {
            for (shift, w) in [(0, int(1)), (p, frac(1, 2)), (-p, frac(1, 2))] {
                *next.entry(n + shift).or_insert_with(Rational::zero) += c * w;
            }
        }
        poly = next;
    }
    poly.retain(|_, c| !c.is_zero());
    poly
}

fn criterion_riesz() -> Outcome {
    let kmax = 7;
    let mut failures = Vec::new();
    let table = riesz_exact_coeffs(kmax).unwrap();
    let oracle = riesz_oracle(kmax);
    let w = table.window();

    let mut expected_range: BTreeSet<Rational> = (0..=7).map(|m| pow2(-m)).collect();
    expected_range.insert(int(0));
    let oracle_range: BTreeSet<Rational> = (-w..=w)
        .map(|n| oracle.get(&n).cloned().unwrap_or_else(Rational::zero))
        .collect();
    if oracle_range != expected_range {
        failures.push("oracle_range".into());
    }
    let reported: BTreeSet<Rational> = range_closure_report(&table, 0.0)
        .iter()
        .map(|v| dyadic_spectra::rational::parse_rational(v.exact.as_deref().unwrap()).unwrap())
        .collect();
    if reported != expected_range {
        failures.push("range".into());
    }
    if (-w..=w).any(|n| table.exact(n).unwrap() != oracle.get(&n).cloned().unwrap_or_else(Rational::zero)) {
        failures.push("coefficients".into());
    }

    let mut pm: BTreeSet<i64> = BTreeSet::new();
    for a in 1..=kmax {
        for b in (a + 1)..=kmax {
            let (x, y) = (3i64.pow(a), 3i64.pow(b));
            for (s, t) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                pm.insert(s * x + t * y);
            }
        }
    }
    let quarter: BTreeSet<i64> = level_set(&table, 0.25, 0.0).unwrap().into_iter().collect();
    let oracle_quarter: BTreeSet<i64> = oracle.iter().filter(|(_, c)| **c == frac(1, 4)).map(|(n, _)| *n).collect();
    if quarter != pm || oracle_quarter != pm {
        failures.push("level_set_quarter".into());
    }
    outcome(
        failures,
        format!("{} range values, |level_set(1/4)| = {}", reported.len(), quarter.len()),
    )
}

fn criterion_hn() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = BTreeSet::new();
    for _ in 0..50 {
        let n = rng.random_range(0..=14u32);
        // ε = q·2^{-n-1-L} with 0 < q < 2^L
        let l = rng.random_range(1..=10u32);
        let q = rng.random_range(1..(1i64 << l));
        let eps = Rational::from_integer(q.into()) * pow2(-(n as i64) - 1 - l as i64);
        let h = make_hn(n, &eps, Orientation::Reflected).unwrap();
        let quoted = frac(1, 2) + &eps * &eps * pow2(2 * n as i64 + 1);
        if h.l1() != quoted {
            failures.insert("l1_quoted_form");
        }
        if !h.integral().is_zero() {
            failures.insert("mean_zero");
        }
        if h.linf() > pow2(n as i64) {
            failures.insert("sup_norm");
        }
    }
    outcome(
        failures.into_iter().map(String::from).collect(),
        "50 random (n, ε)".into(),
    )
}

fn criterion_river() -> Outcome {
    let beta = frac(1, 2);
    let params = RiverParams::new(beta.clone(), frac(-3, 4), frac(3, 4)).unwrap();
    // n > 0.9·(1 − β/(|α|ρ))·k
    let floor = 0.9 * (1.0 - 0.5 / (0.75 * 0.75)) * 20.0;
    let mut failures = Vec::new();
    let mut min_n = u32::MAX;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_class_member(&mut rng, 20, &beta, 20).unwrap();
        match mountain_river_search(&mu, &params, 20) {
            Ok(o) => {
                min_n = min_n.min(o.n);
                let budget = &params.rho * mu.total_variation();
                if (o.n as f64) <= floor || o.turbulent_mass >= budget || !o.identity_holds {
                    failures.push(format!("seed {seed}"));
                }
            }
            Err(_) => failures.push(format!("seed {seed} (no level)")),
        }
    }
    outcome(failures, format!("200 members of M(1/2, 20), smallest level {min_n} > {floor:.2}"))
}

fn sparse_dimension_zero(seed: u64) -> DyadicMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(1..=8usize);
    let atoms: Vec<(u64, Rational)> = (0..count)
        .map(|_| {
            let cell = rng.random_range(0..1u64 << 24);
            (cell, frac(rng.random_range(1..=32), 1))
        })
        .collect();
    let mu = DyadicMeasure::from_atoms(24, atoms).unwrap();
    let total = mu.total_mass();
    mu.scale(&(int(1) / total))
}

fn criterion_witness() -> Outcome {
    let (alpha, rho, eta) = (frac(-3, 4), frac(3, 4), frac(1, 1000));
    let mut cases: Vec<(String, DyadicMeasure, Rational)> =
        vec![("cantor".into(), make_cantor(&alternating_pattern(), 24).unwrap(), frac(1, 2))];
    for seed in 0..20 {
        cases.push((format!("sparse{seed}"), sparse_dimension_zero(seed), frac(1, 4)));
    }
    let mut failures = Vec::new();
    let mut worst = f64::INFINITY;
    for (name, mu, beta) in &cases {
        match witness_pipeline(mu, beta, &alpha, &rho, &eta) {
            Ok(r) => {
                let achieved = r.witness.as_ref().map(|w| w.achieved_f64);
                let ok = !r.vacuous && r.passed() && achieved.is_some_and(|a| a >= r.bound);
                if let Some(a) = achieved {
                    worst = worst.min(a / r.bound);
                }
                if !ok {
                    let failed: Vec<_> = dyadic_spectra::ledger::failures(&r.checks);
                    failures.push(format!("{name} {failed:?}"));
                }
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    outcome(failures, format!("{} measures, min achieved/bound = {worst:.3}", cases.len()))
}

fn criterion_band() -> Outcome {
    let (a, b) = (frac(1, 25), int(10_000));
    let mut failures = Vec::new();
    for n in 8..=12 {
        let eps = dyadic_spectra::testfn::default_band_epsilon(n);
        match band_report(n, &eps, &a, &b, DEFAULT_TAIL_TERMS, n as u64) {
            Ok(r) => {
                let low_edge = 0.04 * 2f64.powf(2.0 * n as f64 / 3.0);
                let high_edge = 10_000.0 * 4f64.powi(n as i32);
                let e = &r.energies;
                let support_in_band = (r.support.low_edge as f64) >= low_edge && (r.support.high_edge as f64) <= high_edge;
                let no_negative = r.support.outside_support.iter().all(|&j| j >= 0);
                let low_ok = e.low < 8.0 * std::f64::consts::PI.powi(2) * 0.04f64.powi(3);
                let high_ok = e.high_upper < 18.0 / 10_000.0;
                if !low_ok
                    || !high_ok
                    || !r.support.holds()
                    || !support_in_band
                    || !no_negative
                {
                    failures.push(format!("n={n}"));
                }
            }
            Err(e) => failures.push(format!("n={n}: {e}")),
        }
    }
    outcome(failures, "n = 8..12, a = 0.04, b = 1e4".into())
}

fn criterion_decay() -> Outcome {
    let mu = make_sparse(&square_cells(16), 16).unwrap();
    let r = spectral_decay_experiment(&mu, 4, 4096, &frac(1, 2), &frac(-3, 4), &frac(3, 4), &frac(1, 1000)).unwrap();
    let sups: Vec<f64> = r.rows.iter().map(|row| row.sup_abs).collect();
    let bounds: Vec<f64> = r.rows.iter().map(|row| row.bound).collect();
    let mut failures = Vec::new();
    if !sups.windows(2).all(|w| w[1] < w[0]) {
        failures.push("sup_strictly_decreasing".into());
    }
    if !(bounds[0] > 0.0 && bounds.iter().all(|&b| b >= 0.5 * bounds[0])) {
        failures.push("bound_floor".into());
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(", ");
    outcome(failures, format!("sup |μ̂^m| m=1..4: {}; bounds: {}", fmt(&sups), fmt(&bounds)))
}

fn random_measure(rng: &mut ChaCha8Rng, resolution: u32) -> DyadicMeasure {
    let count = rng.random_range(1..=24usize);
    let atoms: Vec<(u64, Rational)> = (0..count)
        .map(|_| {
            (
                rng.random_range(0..1u64 << resolution),
                frac(rng.random_range(-20..=20), rng.random_range(1..=9)),
            )
        })
        .collect();
    DyadicMeasure::from_atoms(resolution, atoms).unwrap()
}

fn brute_lorentz(a: &[f64], k: usize) -> f64 {
    let mut best = 0.0f64;
    for mask in 0u32..(1 << a.len()) {
        if mask.count_ones() as usize <= k {
            let s: f64 = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| a[i].abs()).sum();
            best = best.max(s);
        }
    }
    best
}

fn criterion_walsh() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = BTreeSet::new();

    let mut measures: Vec<DyadicMeasure> = (0..8).map(|_| random_measure(&mut rng, 13)).collect();
    measures.push(make_cantor(&alternating_pattern(), 13).unwrap());
    for mu in &measures {
        let e = walsh_coeffs(mu, 12).unwrap();
        for n in 0..=12 {
            let (l, r) = parseval_sides(&e, mu, n).unwrap();
            if l != r {
                failures.insert("parseval".to_string());
            }
        }
    }

    for level in 0..=8u32 {
        let m = walsh_haar_matrix(level).unwrap();
        for _ in 0..100 {
            let mu = random_measure(&mut rng, 10);
            let e = walsh_coeffs(&mu, level + 1).unwrap();
            let group = e.group(level + 1).unwrap();
            if m.apply(group).unwrap() != haar_coeffs(&mu, level).unwrap() {
                failures.insert(format!("walsh_to_haar level {level}"));
            }
        }
    }

    for i in 0..1000 {
        let level = (i % 9) as u32;
        let m = walsh_haar_matrix(level).unwrap();
        let x: Vec<Rational> = (0..m.size())
            .map(|_| frac(rng.random_range(-1000..=1000), rng.random_range(1..=50)))
            .collect();
        let y = m.apply(&x).unwrap();
        let l1 = |v: &[Rational]| v.iter().map(|t| t.abs()).sum::<Rational>();
        let linf = |v: &[Rational]| v.iter().map(|t| t.abs()).max().unwrap_or_else(Rational::zero);
        if l1(&y) > l1(&x) {
            failures.insert("l1_contraction".into());
        }
        if linf(&y) > linf(&x) {
            failures.insert("linf_contraction".into());
        }
        // W(k) for every k at once: prefix sums of the decreasing rearrangement
        let prefix = |v: &[Rational]| {
            let mut a: Vec<Rational> = v.iter().map(|t| t.abs()).collect();
            a.sort_unstable_by(|p, q| q.cmp(p));
            let mut acc = Rational::zero();
            a.into_iter()
                .map(|t| {
                    acc += t;
                    acc.clone()
                })
                .collect::<Vec<_>>()
        };
        let (wx, wy) = (prefix(&x), prefix(&y));
        if wx.iter().zip(&wy).any(|(a, b)| b > a) {
            failures.insert("lorentz_contraction".into());
        }
        let k = rng.random_range(1..=x.len());
        if lorentz_norm(&y, k as u64) != wy[k - 1] || lorentz_norm(&y, k as u64) > lorentz_norm(&x, k as u64) {
            failures.insert("lorentz_contraction".into());
        }
    }

    for _ in 0..300 {
        let len = rng.random_range(0..=16usize);
        let a: Vec<Rational> = (0..len).map(|_| frac(rng.random_range(-50..=50), rng.random_range(1..=7))).collect();
        let af: Vec<f64> = a.iter().map(to_f64).collect();
        for k in 0..=len {
            let exact = to_f64(&lorentz_norm(&a, k as u64));
            if (exact - brute_lorentz(&af, k)).abs() > 1e-9 {
                failures.insert("lorentz_oracle".into());
            }
        }
    }
    outcome(
        failures.into_iter().collect(),
        "Parseval n ≤ 12, 900 Walsh→Haar maps, 1000 contraction probes, 300 Lorentz oracles".into(),
    )
}

fn criterion_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = BTreeSet::new();

    for _ in 0..200 {
        let k = rng.random_range(1..=12u32);
        let mu = {
            let count = rng.random_range(1..=12usize);
            let atoms: Vec<(u64, Rational)> = (0..count)
                .map(|_| (rng.random_range(0..1u64 << 14), frac(rng.random_range(-30..=30), rng.random_range(1..=5))))
                .collect();
            DyadicMeasure::from_atoms(14, atoms).unwrap()
        };
        let beta = frac(rng.random_range(0..=8), 8);
        let est = c_beta_estimate(&mu, &beta, k).unwrap();
        let cells: Vec<Rational> = mu.level_variation(k).into_values().collect();
        let cap = est.cap as usize;
        let mut best = Rational::zero();
        for mask in 0u32..(1 << cells.len()) {
            if mask.count_ones() as usize <= cap {
                let s: Rational = (0..cells.len()).filter(|i| mask >> i & 1 == 1).map(|i| cells[i].clone()).sum();
                if s > best {
                    best = s;
                }
            }
        }
        if est.value != best {
            failures.insert("c_beta_exhaustive".to_string());
        }
    }

    for _ in 0..40 {
        let count = rng.random_range(1..=10usize);
        let jumps: Vec<(Rational, Rational)> = (0..count)
            .map(|_| (frac(rng.random_range(0..1000), 1000), frac(rng.random_range(-20..=20), 3)))
            .collect();
        let net: Rational = jumps.iter().map(|(_, d)| d.clone()).sum();
        let mut jumps = jumps;
        jumps.push((frac(999, 1000), -net));
        let f = StepFunction::from_jumps(jumps, &frac(rng.random_range(-5..=5), 7)).unwrap();
        for k in [10u32, 14, 18] {
            let err = (f.riemann_l1(k) - to_f64(&f.l1())).abs();
            // each breakpoint perturbs one sample cell by at most its jump
            let bound = to_f64(&f.variation()) * 2f64.powi(-(k as i32)) + 1e-12;
            if err > bound {
                failures.insert("riemann_l1".to_string());
            }
        }
    }

    for _ in 0..20 {
        let mu = random_measure(&mut rng, 12);
        let nu = random_measure(&mut rng, 12);
        let conv = mu.convolve(&nu).unwrap();
        for _ in 0..50 {
            let n = rng.random_range(-5000..=5000i64);
            let lhs = fourier::coefficient(&conv, n);
            let rhs = fourier::coefficient(&mu, n) * fourier::coefficient(&nu, n);
            let scale = to_f64(&mu.total_variation()) * to_f64(&nu.total_variation());
            if (lhs - rhs).norm() > 1e-12 * scale.max(1.0) {
                failures.insert("convolution_theorem".to_string());
            }
        }
    }
    outcome(
        failures.into_iter().collect(),
        "200 c_β exhaustive checks, 120 Riemann sums, 1000 convolution probes".into(),
    )
}

#[test]
fn acceptance_criteria() {
    let mut lines = Vec::new();
    let s = Duration::from_secs;
    run(1, "riesz exactness", s(1), criterion_riesz, &mut lines);
    run(2, "h_n identities", s(1), criterion_hn, &mut lines);
    run(3, "mountain river suite", s(10), criterion_river, &mut lines);
    run(4, "witness lower bound", s(30), criterion_witness, &mut lines);
    run(5, "band bounds", s(60), criterion_band, &mut lines);
    run(6, "spectral decay contrast", s(60), criterion_decay, &mut lines);
    run(7, "walsh suite", s(30), criterion_walsh, &mut lines);
    run(8, "oracle equivalences", s(30), criterion_oracles, &mut lines);
    let failed: Vec<&String> = lines.iter().filter(|(ok, _)| !ok).map(|(_, l)| l).collect();
    assert!(failed.is_empty(), "{} criteria failed:\n{}", failed.len(), failed.iter().map(|l| l.as_str()).collect::<Vec<_>>().join("\n"));
}
