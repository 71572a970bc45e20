use std::collections::BTreeMap;

use clap::Args;
use num_traits::{Signed, Zero};
use serde::Serialize;

use super::report::{opt_rat_pair, rat_pair, Outcome, Report, Table};
use super::{load_measure, parse_rat, Command, GlobalArgs};
use crate::error::{Error, Result};
use crate::fourier::{self, riesz_coefficient, riesz_exact_coeffs, spectral_decay_experiment};
use crate::ledger::Check;
use crate::martingale::{
    build_tree, c_beta_estimate, check_class_membership, classify, mountain_river_search, select_cover,
    CoverOptions, RiverParams, SplitThreshold,
};
use crate::rational::{self, int, pow2, Rational};
use crate::testfn::{
    band_norm_experiment, band_report, default_band_epsilon, make_hn, witness_pipeline, BandProjection, Orientation,
    DEFAULT_TAIL_TERMS,
};
use crate::walsh::{
    dimension_bound_check, haar_coeffs, parseval_sides, turbulence_aggregates, lorentz_level_statistic, walsh_coeffs,
    walsh_haar_matrix, DimensionMode, LorentzOptions, MAX_MATRIX_LEVEL,
};

#[derive(Clone, Debug, Args, Serialize)]
pub struct MeasureArgs {
    /// Measure spec: a JSON file or inline JSON.
    #[arg(long)]
    pub measure: String,
    /// Coarsen to this resolution `K′` first.
    #[arg(long)]
    pub coarsen: Option<u32>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct TreeArgs {
    #[arg(long)]
    pub measure: String,
    /// Split exponent `α`; enables the vertex classification columns.
    #[arg(long, value_parser = parse_rat, allow_hyphen_values = true)]
    #[serde(with = "rational::serde_str::option")]
    pub alpha: Option<Rational>,
    /// Deepest level `n` to list.
    #[arg(long)]
    pub n: Option<u32>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct RiverArgs {
    #[arg(long)]
    pub measure: String,
    #[arg(long, value_parser = parse_rat)]
    #[serde(with = "rational::serde_str")]
    pub beta: Rational,
    #[arg(long, value_parser = parse_rat, allow_hyphen_values = true, default_value = "-3/4")]
    #[serde(with = "rational::serde_str")]
    pub alpha: Rational,
    #[arg(long, value_parser = parse_rat, default_value = "3/4")]
    #[serde(with = "rational::serde_str")]
    pub rho: Rational,
    /// Scale `k`; defaults to the measure resolution.
    #[arg(long)]
    pub k: Option<u32>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct CoverArgs {
    /// Measure spec for `ν₁`.
    #[arg(long)]
    pub nu1: String,
    /// Measure spec for `ν₂`.
    #[arg(long)]
    pub nu2: String,
    #[arg(long, value_parser = parse_rat)]
    #[serde(with = "rational::serde_str")]
    pub beta: Rational,
    #[arg(long, value_parser = parse_rat)]
    #[serde(with = "rational::serde_str")]
    pub tau: Rational,
    /// Margin `δ` used at every scale (default: one cell).
    #[arg(long, value_parser = parse_rat)]
    #[serde(with = "rational::serde_str::option")]
    pub delta: Option<Rational>,
    /// Coarsest scale `k` to try.
    #[arg(long, default_value_t = 0)]
    pub k_min: u32,
    /// Finest scale `k` to try.
    #[arg(long)]
    pub k_max: Option<u32>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct CbetaArgs {
    #[arg(long)]
    pub measure: String,
    #[arg(long, value_parser = parse_rat)]
    #[serde(with = "rational::serde_str")]
    pub beta: Rational,
    /// Level `k`; defaults to the measure resolution.
    #[arg(long)]
    pub k: Option<u32>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct WitnessArgs {
    #[arg(long)]
    pub measure: String,
    #[arg(long, value_parser = parse_rat)]
    #[serde(with = "rational::serde_str")]
    pub beta: Rational,
    #[arg(long, value_parser = parse_rat, allow_hyphen_values = true, default_value = "-3/4")]
    #[serde(with = "rational::serde_str")]
    pub alpha: Rational,
    #[arg(long, value_parser = parse_rat, default_value = "3/4")]
    #[serde(with = "rational::serde_str")]
    pub rho: Rational,
    #[arg(long, value_parser = parse_rat, default_value = "1/1000")]
    #[serde(with = "rational::serde_str")]
    pub eta: Rational,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct BandArgs {
    /// Level `n` of `h_n` (ignored with `--measure`, which picks its own).
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long, value_parser = parse_rat)]
    #[serde(with = "rational::serde_str")]
    pub a: Rational,
    #[arg(long, value_parser = parse_rat)]
    #[serde(with = "rational::serde_str")]
    pub b: Rational,
    /// Plateau offset `ε`; defaults to `2^{-n-3}`.
    #[arg(long, value_parser = parse_rat)]
    #[serde(with = "rational::serde_str::option")]
    pub epsilon: Option<Rational>,
    /// High-band terms summed before the analytic tail majorant.
    #[arg(long, default_value_t = DEFAULT_TAIL_TERMS)]
    pub tail_terms: u64,
    /// Emit `ĥ_n(j)` and `p̂_n(j)` for `|j| ≤ N`.
    #[arg(long = "N")]
    pub window: Option<i64>,
    /// With a measure, run the norm experiment on the witness instead.
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long, value_parser = parse_rat)]
    #[serde(with = "rational::serde_str::option")]
    pub beta: Option<Rational>,
    #[arg(long, value_parser = parse_rat, allow_hyphen_values = true, default_value = "-3/4")]
    #[serde(with = "rational::serde_str")]
    pub alpha: Rational,
    #[arg(long, value_parser = parse_rat, default_value = "3/4")]
    #[serde(with = "rational::serde_str")]
    pub rho: Rational,
    #[arg(long, value_parser = parse_rat, default_value = "1/1000")]
    #[serde(with = "rational::serde_str")]
    pub eta: Rational,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct RieszArgs {
    /// Number of factors `K`.
    #[arg(long)]
    pub kmax: u32,
    /// List the frequencies where `μ̂ = q`.
    #[arg(long)]
    pub level_set: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub measure: String,
    /// Window `N`.
    #[arg(long = "N")]
    pub window: i64,
    /// Also cluster the values into a range census at this tolerance.
    #[arg(long)]
    pub range_tol: Option<f64>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct DecayArgs {
    #[arg(long)]
    pub measure: String,
    #[arg(long)]
    pub mmax: u32,
    #[arg(long = "N")]
    pub window: i64,
    #[arg(long, value_parser = parse_rat)]
    #[serde(with = "rational::serde_str")]
    pub beta: Rational,
    #[arg(long, value_parser = parse_rat, allow_hyphen_values = true, default_value = "-3/4")]
    #[serde(with = "rational::serde_str")]
    pub alpha: Rational,
    #[arg(long, value_parser = parse_rat, default_value = "3/4")]
    #[serde(with = "rational::serde_str")]
    pub rho: Rational,
    #[arg(long, value_parser = parse_rat, default_value = "1/1000")]
    #[serde(with = "rational::serde_str")]
    pub eta: Rational,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct WalshArgs {
    #[arg(long)]
    pub measure: String,
    /// Deepest Walsh group `max A`.
    #[arg(long)]
    pub nmax: u32,
    #[arg(long, value_parser = parse_rat)]
    #[serde(with = "rational::serde_str")]
    pub lambda: Rational,
    #[arg(long, value_parser = parse_rat)]
    #[serde(with = "rational::serde_str")]
    pub beta: Rational,
    /// `β′` of the level-sum aggregates; defaults to `β` (or ½ when `β = 0`).
    #[arg(long, value_parser = parse_rat)]
    #[serde(with = "rational::serde_str::option")]
    pub beta_prime: Option<Rational>,
    /// Split exponent `α` for the turbulent vertices in the aggregates.
    #[arg(long, value_parser = parse_rat, allow_hyphen_values = true, default_value = "-1/2")]
    #[serde(with = "rational::serde_str")]
    pub alpha: Rational,
    /// Threshold constant; defaults to the witness-bound constant.
    #[arg(long)]
    pub theta_c: Option<f64>,
    #[arg(long, value_parser = parse_rat, default_value = "1/1000")]
    #[serde(with = "rational::serde_str")]
    pub eta: Rational,
    /// First Haar level `n` of the per-level table.
    #[arg(long, default_value_t = 1)]
    pub n_min: u32,
    #[arg(long, default_value_t = 1e-12)]
    pub zero_tol: f64,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ManifestArgs {
    /// Manifest JSON file.
    pub path: std::path::PathBuf,
}

pub fn execute(cmd: &Command, g: &GlobalArgs, echo: Vec<String>) -> Result<(Report, Option<Table>)> {
    let (params, outcome) = match cmd {
        Command::Measure(a) => (serde_json::to_value(a)?, measure_cmd(a, g)?),
        Command::Tree(a) => (serde_json::to_value(a)?, tree_cmd(a, g)?),
        Command::MountainRiver(a) => (serde_json::to_value(a)?, river_cmd(a, g)?),
        Command::Cover(a) => (serde_json::to_value(a)?, cover_cmd(a, g)?),
        Command::Cbeta(a) => (serde_json::to_value(a)?, cbeta_cmd(a, g)?),
        Command::Witness(a) => (serde_json::to_value(a)?, witness_cmd(a, g)?),
        Command::Band(a) => (serde_json::to_value(a)?, band_cmd(a, g)?),
        Command::Riesz(a) => (serde_json::to_value(a)?, riesz_cmd(a)?),
        Command::Spectrum(a) => (serde_json::to_value(a)?, spectrum_cmd(a, g)?),
        Command::Decay(a) => (serde_json::to_value(a)?, decay_cmd(a, g)?),
        Command::Walsh(a) => (serde_json::to_value(a)?, walsh_cmd(a, g)?),
        Command::Manifest(a) => (serde_json::to_value(a)?, super::manifest::manifest_cmd(&a.path, g)?),
    };
    let mut params = params;
    if let (Some(obj), Some(seed)) = (params.as_object_mut(), g.seed) {
        obj.insert("seed".into(), seed.into());
    }
    let table = outcome.table.clone();
    Ok((Report::new(echo, params, outcome), table))
}

#[derive(Serialize)]
struct MeasureSummary {
    resolution: u32,
    support_size: usize,
    positive: bool,
    sampled: bool,
    #[serde(with = "rational::serde_str")]
    total_variation: Rational,
    #[serde(with = "rational::serde_str")]
    total_mass: Rational,
    atoms: Vec<(u64, String)>,
}

fn measure_cmd(a: &MeasureArgs, g: &GlobalArgs) -> Result<Outcome> {
    let original = load_measure(&a.measure, g.seed)?;
    let mut checks = Vec::new();
    let mu = match a.coarsen {
        Some(k) => {
            let c = original.coarsen(k)?;
            if original.is_positive() {
                checks.push(Check::exact_eq(
                    "coarsen_keeps_variation",
                    &c.total_variation(),
                    &original.total_variation(),
                ));
            }
            c
        }
        None => original,
    };
    let mut t = Table::new(&["index", "numerator", "denominator", "weight"]);
    for (&j, w) in mu.atoms() {
        t.push(vec![
            j.to_string(),
            w.numer().to_string(),
            w.denom().to_string(),
            rational::to_f64(w).to_string(),
        ]);
    }
    let summary = MeasureSummary {
        resolution: mu.resolution(),
        support_size: mu.support_size(),
        positive: mu.is_positive(),
        sampled: mu.is_sampled(),
        total_variation: mu.total_variation(),
        total_mass: mu.total_mass(),
        atoms: mu.atoms().iter().map(|(&j, w)| (j, rational::to_fraction_string(w))).collect(),
    };
    Outcome::new(&summary, Some(t), checks)
}

#[derive(Serialize)]
struct TreeLevel {
    n: u32,
    active: usize,
    #[serde(with = "rational::serde_str")]
    level_sum: Rational,
    classification: Option<LevelClass>,
}

#[derive(Serialize)]
struct LevelClass {
    turbulent: usize,
    #[serde(with = "rational::serde_str")]
    turbulent_mass: Rational,
    descent: usize,
    #[serde(with = "rational::serde_str")]
    descent_excess: Rational,
    ascent: usize,
    #[serde(with = "rational::serde_str")]
    ascent_excess: Rational,
}

fn tree_cmd(a: &TreeArgs, g: &GlobalArgs) -> Result<Outcome> {
    let mu = load_measure(&a.measure, g.seed)?;
    let tree = build_tree(&mu);
    let threshold = a.alpha.clone().map(SplitThreshold::exponent).transpose()?;
    let last = a.n.unwrap_or(tree.depth()).min(tree.depth());
    let mut levels = Vec::new();
    let mut t = Table::new(&[
        "n",
        "active",
        "level_sum",
        "level_sum_exact",
        "turbulent",
        "turbulent_mass",
        "turbulent_mass_exact",
        "descent",
        "descent_excess",
        "descent_excess_exact",
        "ascent",
        "ascent_excess",
        "ascent_excess_exact",
    ]);
    for n in 0..=last {
        let classification = match &threshold {
            Some(th) if n < tree.depth() => {
                let c = classify(&tree, n, th)?;
                Some(LevelClass {
                    turbulent: c.turbulent.len(),
                    turbulent_mass: c.turbulent_mass(&tree),
                    descent: c.descent.len(),
                    descent_excess: c.descent_excess(&tree),
                    ascent: c.ascent.len(),
                    ascent_excess: c.ascent_excess(&tree),
                })
            }
            _ => None,
        };
        let level = TreeLevel {
            n,
            active: tree.level(n).len(),
            level_sum: tree.level_sum(n),
            classification,
        };
        let mut row = vec![n.to_string(), level.active.to_string()];
        row.extend(rat_pair(&level.level_sum));
        match &level.classification {
            Some(c) => {
                row.push(c.turbulent.to_string());
                row.extend(rat_pair(&c.turbulent_mass));
                row.push(c.descent.to_string());
                row.extend(rat_pair(&c.descent_excess));
                row.push(c.ascent.to_string());
                row.extend(rat_pair(&c.ascent_excess));
            }
            None => row.extend(std::iter::repeat_n(String::new(), 9)),
        }
        t.push(row);
        levels.push(level);
    }
    let checks = vec![Check::flag("tree_consistent", tree.is_consistent())];
    Outcome::new(&levels, Some(t), checks)
}

fn river_cmd(a: &RiverArgs, g: &GlobalArgs) -> Result<Outcome> {
    let mu = load_measure(&a.measure, g.seed)?;
    let params = RiverParams::new(a.beta.clone(), a.alpha.clone(), a.rho.clone())?;
    let k = a.k.unwrap_or(mu.resolution());
    let mut t = Table::new(&["level", "turbulent_mass", "turbulent_mass_exact"]);
    match mountain_river_search(&mu, &params, k) {
        Ok(o) => {
            for lm in &o.turbulent_mass_by_level {
                let mut row = vec![lm.level.to_string()];
                row.extend(rat_pair(&lm.mass));
                t.push(row);
            }
            let checks = vec![
                Check::exact_lt("turbulent_mass_below_budget", &o.turbulent_mass, &o.budget),
                Check::flag("ancestor_count_identity", o.identity_holds),
                Check::flag("level_beyond_window_start", o.n > o.window.r),
            ];
            Outcome::new(&o, Some(t), checks)
        }
        Err(Error::River(f)) => {
            for lm in &f.turbulent_mass_by_level {
                let mut row = vec![lm.level.to_string()];
                row.extend(rat_pair(&lm.mass));
                t.push(row);
            }
            Outcome::new(&f, Some(t), vec![Check::flag("level_found", false)])
        }
        Err(e) => Err(e),
    }
}

fn cover_cmd(a: &CoverArgs, g: &GlobalArgs) -> Result<Outcome> {
    let nu1 = load_measure(&a.nu1, g.seed)?;
    let nu2 = load_measure(&a.nu2, g.seed)?;
    let k_max = a.k_max.unwrap_or(nu1.resolution());
    let mut margins = BTreeMap::new();
    if let Some(d) = &a.delta {
        for k in a.k_min..=k_max {
            margins.insert(k, d.clone());
        }
    }
    let options = CoverOptions {
        margins,
        c_beta: None,
        min_level: a.k_min,
        max_level: Some(k_max),
    };
    match select_cover(&nu1, &nu2, &a.beta, &a.tau, &options) {
        Ok(f) => {
            let masses = nu1.level_masses(f.level);
            let mut t = Table::new(&["cell", "left", "left_exact", "nu1_mass", "nu1_mass_exact"]);
            for &c in &f.cells {
                let mut row = vec![c.to_string()];
                row.extend(rat_pair(&(Rational::from_integer(c.into()) * &f.cell_length)));
                row.extend(opt_rat_pair(masses.get(&c)));
                t.push(row);
            }
            let checks = vec![
                Check::exact_lt("nu2_margin_mass_below_tau", &f.recheck_margin(&nu2), &f.tau),
                Check::exact_lt("half_target_below_nu1_mass", &f.half_target, &f.recheck_nu1(&nu1)),
                Check::flag("cell_count_within_cap", f.cells.len() as u64 <= f.cap),
            ];
            Outcome::new(&f, Some(t), checks)
        }
        Err(Error::Cover(f)) => Outcome::new(&f, None, vec![Check::flag("cover_found", false)]),
        Err(e) => Err(e),
    }
}

fn cbeta_cmd(a: &CbetaArgs, g: &GlobalArgs) -> Result<Outcome> {
    let mu = load_measure(&a.measure, g.seed)?;
    let k = a.k.unwrap_or(mu.resolution());
    let est = c_beta_estimate(&mu, &a.beta, k)?;
    let membership = check_class_membership(&mu, &a.beta, k)?;
    let variation = mu.level_variation(k);
    let mut t = Table::new(&["rank", "cell", "mass", "mass_exact"]);
    for (i, c) in est.cells.iter().enumerate() {
        let mut row = vec![(i + 1).to_string(), c.to_string()];
        row.extend(opt_rat_pair(variation.get(c)));
        t.push(row);
    }
    let checks = vec![
        Check::recorded("c_beta", rational::to_fraction_string(&est.value), format!("cap {}", est.cap)),
        Check::recorded(
            "class_membership",
            membership.count.to_string(),
            membership.cap.to_string(),
        ),
    ];
    Outcome::new(
        &serde_json::json!({"estimate": est, "membership": membership}),
        Some(t),
        checks,
    )
}

fn witness_cmd(a: &WitnessArgs, g: &GlobalArgs) -> Result<Outcome> {
    let mu = load_measure(&a.measure, g.seed)?;
    match witness_pipeline(&mu, &a.beta, &a.alpha, &a.rho, &a.eta) {
        Ok(r) => {
            let checks = r.checks.clone();
            Outcome::new(&r, None, checks)
        }
        Err(Error::NoAdmissibleScale { attempts }) => Outcome::new(
            &serde_json::json!({"attempts": attempts}),
            None,
            vec![Check::flag("admissible_scale", false)],
        ),
        Err(e) => Err(e),
    }
}

fn band_cmd(a: &BandArgs, g: &GlobalArgs) -> Result<Outcome> {
    if let Some(spec) = &a.measure {
        let mu = load_measure(spec, g.seed)?;
        let beta = a
            .beta
            .as_ref()
            .ok_or_else(|| Error::invalid("--beta is required with --measure"))?;
        let r = band_norm_experiment(&mu, beta, &a.alpha, &a.rho, &a.eta, &a.a, &a.b)?;
        let checks = r.checks.clone();
        return Outcome::new(&r, None, checks);
    }
    let n = a.n.ok_or_else(|| Error::invalid("--n is required without --measure"))?;
    let eps = a.epsilon.clone().unwrap_or_else(|| default_band_epsilon(n));
    let r = band_report(n, &eps, &a.a, &a.b, a.tail_terms, g.seed.unwrap_or(0))?;
    let table = match a.window {
        Some(w) if w < 0 => return Err(Error::invalid("window N must be nonnegative")),
        Some(w) => {
            let h = make_hn(n, &eps, Orientation::Direct)?;
            let proj = BandProjection::new(h, &a.a, &a.b, r.energies.high_last)?;
            let mut t = Table::new(&["j", "h_re", "h_im", "p_re", "p_im"]);
            for j in -w..=w {
                let (h, p) = (proj.h_hat(j), proj.p_hat(j));
                t.push(vec![
                    j.to_string(),
                    h.re.to_string(),
                    h.im.to_string(),
                    p.re.to_string(),
                    p.im.to_string(),
                ]);
            }
            Some(t)
        }
        None => None,
    };
    let checks = r.checks.clone();
    Outcome::new(&r, table, checks)
}

#[derive(Serialize)]
struct RieszResult {
    kmax: u32,
    window: i64,
    range: Vec<fourier::RangeValue>,
    level_set: Option<Vec<i64>>,
}

fn riesz_cmd(a: &RieszArgs) -> Result<Outcome> {
    let table = riesz_exact_coeffs(a.kmax)?;
    let range = fourier::range_closure_report(&table, a.tol);
    let window = table.window();
    let mut checks = Vec::new();
    let mut expected: Vec<Rational> = (0..=a.kmax).map(|m| pow2(-(m as i64))).collect();
    expected.push(Rational::zero());
    expected.sort();
    let mut got: Vec<Rational> = range
        .iter()
        .filter_map(|v| v.exact.as_deref().map(rational::parse_rational))
        .collect::<Result<_>>()?;
    got.sort();
    checks.push(Check::flag("range_is_dyadic_powers_and_zero", got == expected));
    let total: u64 = range.iter().map(|v| v.multiplicity).sum();
    checks.push(Check::flag("multiplicities_cover_window", total == 2 * window as u64 + 1));

    let level_set = match a.level_set {
        Some(q) => {
            let set = fourier::level_set(&table, q, a.tol)?;
            if a.tol == 0.0 {
                let target = rational::from_f64(q)?;
                let exact = set.iter().all(|&n| riesz_coefficient(a.kmax, n) == target);
                checks.push(Check::flag("level_set_values_exact", exact));
                let census = range
                    .iter()
                    .find(|v| v.re == q)
                    .map_or(0, |v| v.multiplicity);
                checks.push(Check::exact_eq(
                    "level_set_size_matches_census",
                    &int(set.len() as i64),
                    &int(census as i64),
                ));
            }
            Some(set)
        }
        None => None,
    };
    let t = match &level_set {
        Some(set) => {
            let mut t = Table::new(&["n"]);
            for n in set {
                t.push(vec![n.to_string()]);
            }
            t
        }
        None => {
            let mut t = Table::new(&["value", "value_exact", "multiplicity"]);
            for v in &range {
                t.push(vec![
                    v.re.to_string(),
                    v.exact.clone().unwrap_or_default(),
                    v.multiplicity.to_string(),
                ]);
            }
            t
        }
    };
    let result = RieszResult {
        kmax: a.kmax,
        window,
        range,
        level_set,
    };
    Outcome::new(&result, Some(t), checks)
}

#[derive(Serialize)]
struct SpectrumResult {
    window: i64,
    source: String,
    sup_abs_nonzero: f64,
    sup_at: i64,
    coefficients: Vec<(i64, f64, f64)>,
    range: Option<Vec<fourier::RangeValue>>,
}

fn spectrum_cmd(a: &SpectrumArgs, g: &GlobalArgs) -> Result<Outcome> {
    let mu = load_measure(&a.measure, g.seed)?;
    let table = fourier::fourier_stieltjes(&mu, a.window)?;
    let (sup, at) = table.sup_abs_nonzero();
    let rows = table.rows();
    let mut t = Table::new(&["j", "re", "im", "abs"]);
    for (j, c) in &rows {
        t.push(vec![j.to_string(), c.re.to_string(), c.im.to_string(), c.norm().to_string()]);
    }
    let tv = rational::to_f64(&mu.total_variation());
    let zero = table.get(0);
    let checks = vec![
        Check::float_close("zero_coefficient_is_total_mass", zero.re, rational::to_f64(&mu.total_mass()), 1e-9),
        Check::flag(
            "coefficients_bounded_by_variation",
            rows.iter().all(|(_, c)| c.norm() <= tv * (1.0 + 1e-12) + 1e-15),
        ),
    ];
    let result = SpectrumResult {
        window: a.window,
        source: table.source().to_string(),
        sup_abs_nonzero: sup,
        sup_at: at,
        coefficients: rows.iter().map(|(j, c)| (*j, c.re, c.im)).collect(),
        range: a.range_tol.map(|tol| fourier::range_closure_report(&table, tol)),
    };
    Outcome::new(&result, Some(t), checks)
}

fn decay_cmd(a: &DecayArgs, g: &GlobalArgs) -> Result<Outcome> {
    let mu = load_measure(&a.measure, g.seed)?;
    let r = spectral_decay_experiment(&mu, a.mmax, a.window, &a.beta, &a.alpha, &a.rho, &a.eta)?;
    let mut t = Table::new(&[
        "m",
        "support",
        "sup_abs",
        "sup_at",
        "c_beta",
        "bound",
        "achieved",
        "pipeline_passed",
    ]);
    for row in &r.rows {
        t.push(vec![
            row.m.to_string(),
            row.support.to_string(),
            row.sup_abs.to_string(),
            row.sup_at.to_string(),
            row.c_beta.to_string(),
            row.bound.to_string(),
            row.achieved.map(|x| x.to_string()).unwrap_or_default(),
            row.pipeline_passed.to_string(),
        ]);
    }
    let checks = r.checks.clone();
    Outcome::new(&r, Some(t), checks)
}

fn walsh_cmd(a: &WalshArgs, g: &GlobalArgs) -> Result<Outcome> {
    let mu = load_measure(&a.measure, g.seed)?;
    if a.nmax < 2 {
        return Err(Error::invalid("--nmax must be at least 2"));
    }
    if a.n_min + 1 > a.nmax {
        return Err(Error::invalid("--n-min must be below --nmax"));
    }
    let expansion = walsh_coeffs(&mu, a.nmax)?;
    let mut checks = Vec::new();
    for n in 1..=a.nmax {
        let (l, r) = parseval_sides(&expansion, &mu, n)?;
        checks.push(Check::exact_eq(format!("parseval_{n}"), &l, &r));
    }
    let hi = a.nmax - 1;
    for n in a.n_min..=hi.min(MAX_MATRIX_LEVEL) {
        let m = walsh_haar_matrix(n)?;
        let mapped = m.apply(expansion.group(n + 1)?)?;
        checks.push(Check::flag(format!("walsh_to_haar_{n}"), mapped == haar_coeffs(&mu, n)?));
    }

    let mut opts = LorentzOptions::new(a.beta.clone(), a.lambda.clone(), a.n_min, hi);
    opts.eta = a.eta.clone();
    if let Some(t) = a.theta_c {
        opts.theta_c = t;
    }
    let stats = lorentz_level_statistic(&mu, &opts)?;
    checks.extend(stats.checks.iter().cloned());

    let beta_prime = a.beta_prime.clone().unwrap_or_else(|| {
        if a.beta.is_positive() {
            a.beta.clone()
        } else {
            rational::frac(1, 2)
        }
    });
    let aggregates = turbulence_aggregates(&mu, &a.beta, &beta_prime, &a.alpha, a.nmax)?;
    checks.extend(aggregates.checks.iter().cloned());
    let dimension = dimension_bound_check(
        &mu,
        &DimensionMode::Lambda {
            lambda: a.lambda.clone(),
        },
        a.n_min,
        hi,
        a.zero_tol,
    )?;
    checks.push(Check::recorded(
        "dimension_diagnostic",
        dimension.vanishing.to_string(),
        dimension
            .implied_bound
            .map_or_else(|| "no bound".to_string(), |b| format!("dim > {b}")),
    ));

    let mut t = Table::new(&[
        "n",
        "count",
        "g_lambda",
        "g_lambda_exact",
        "haar_w",
        "haar_w_exact",
        "haar_w_shifted",
        "haar_w_shifted_exact",
        "walsh_w",
        "walsh_w_exact",
        "s1",
        "s1_exact",
        "s2",
        "s2_exact",
        "s3",
        "s3_exact",
        "s4",
        "s4_exact",
    ]);
    let by_level: BTreeMap<u32, _> = aggregates.levels.iter().map(|l| (l.n, l)).collect();
    for n in a.n_min..=a.nmax {
        let stat = stats.levels.iter().find(|l| l.n == n);
        let mut row = vec![n.to_string(), stat.map(|s| s.count.to_string()).unwrap_or_default()];
        row.extend(opt_rat_pair(stat.and_then(|s| s.g_lambda.as_ref())));
        row.extend(opt_rat_pair(stat.map(|s| &s.haar)));
        row.extend(opt_rat_pair(stat.map(|s| &s.haar_shifted)));
        row.extend(opt_rat_pair(stat.map(|s| &s.walsh)));
        let agg = by_level.get(&n);
        row.extend(opt_rat_pair(agg.map(|l| &l.s1)));
        row.extend(opt_rat_pair(agg.map(|l| &l.s2)));
        row.extend(opt_rat_pair(agg.map(|l| &l.s3)));
        row.extend(opt_rat_pair(agg.map(|l| &l.s4)));
        t.push(row);
    }
    let result = serde_json::json!({
        "nmax": a.nmax,
        "empty_coefficient": rational::to_fraction_string(&expansion.empty),
        "group_sizes": (1..=a.nmax).map(|n| expansion.group(n).map(|g| g.len())).collect::<Result<Vec<_>>>()?,
        "lorentz": stats,
        "aggregates": aggregates,
        "dimension": dimension,
    });
    Outcome::new(&result, Some(t), checks)
}
