//! Python bindings. Rationals cross the boundary as `"num/den"` strings and
//! structured results come back as plain dicts.

extern crate dyadic_spectra as spectra;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use spectra::fourier;
use spectra::martingale::{self, RiverParams};
use spectra::measure::spec::MeasureSpec;
use spectra::rational::{self, Rational};
use spectra::testfn;
use spectra::walsh;
use spectra::{DyadicMeasure, Error};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::River(_) | Error::Cover(_) | Error::NoAdmissibleScale { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rat(s: &str) -> PyResult<Rational> {
    rational::parse_rational(s).map_err(to_py_err)
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Signed atomic measure on the `2^-K` grid.
#[pyclass(name = "Measure", module = "dyadic_spectra", frozen)]
struct PyMeasure {
    inner: DyadicMeasure,
}

#[pymethods]
impl PyMeasure {
    /// Builds a measure from a JSON spec such as `{"type": "cantor", "depth": 12}`.
    #[staticmethod]
    #[pyo3(signature = (spec, seed=None))]
    fn from_spec(spec: &str, seed: Option<u64>) -> PyResult<Self> {
        let inner = MeasureSpec::from_json(spec)
            .and_then(|s| s.build(seed))
            .map_err(to_py_err)?;
        Ok(PyMeasure { inner })
    }

    /// `atoms` is a list of `(cell, "num/den")` pairs.
    #[staticmethod]
    fn from_atoms(resolution: u32, atoms: Vec<(u64, String)>) -> PyResult<Self> {
        let atoms = atoms
            .into_iter()
            .map(|(c, w)| Ok((c, rat(&w)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let inner = DyadicMeasure::from_atoms(resolution, atoms).map_err(to_py_err)?;
        Ok(PyMeasure { inner })
    }

    #[getter]
    fn resolution(&self) -> u32 {
        self.inner.resolution()
    }

    fn atoms(&self) -> Vec<(u64, String)> {
        self.inner
            .atoms()
            .iter()
            .map(|(c, w)| (*c, rational::to_fraction_string(w)))
            .collect()
    }

    fn total_mass(&self) -> String {
        rational::to_fraction_string(&self.inner.total_mass())
    }

    fn total_variation(&self) -> String {
        rational::to_fraction_string(&self.inner.total_variation())
    }

    fn level_masses(&self, n: u32) -> Vec<(u64, String)> {
        self.inner
            .level_masses(n)
            .iter()
            .map(|(c, w)| (*c, rational::to_fraction_string(w)))
            .collect()
    }

    fn convolve(&self, other: &PyMeasure) -> PyResult<Self> {
        let inner = self.inner.convolve(&other.inner).map_err(to_py_err)?;
        Ok(PyMeasure { inner })
    }

    /// `μ̂(n)` as a complex number.
    fn fourier(&self, n: i64) -> num_complex::Complex64 {
        fourier::coefficient(&self.inner, n)
    }

    fn __len__(&self) -> usize {
        self.inner.support_size()
    }

    fn __repr__(&self) -> String {
        format!(
            "Measure(resolution={}, atoms={}, mass={})",
            self.inner.resolution(),
            self.inner.support_size(),
            rational::to_fraction_string(&self.inner.total_mass())
        )
    }
}

#[pyfunction]
fn c_beta<'py>(py: Python<'py>, mu: &PyMeasure, beta: &str, k: u32) -> PyResult<Bound<'py, PyAny>> {
    let est = martingale::c_beta_estimate(&mu.inner, &rat(beta)?, k).map_err(to_py_err)?;
    to_dict(py, &est)
}

#[pyfunction]
#[pyo3(signature = (mu, beta, k, alpha="-3/4", rho="3/4"))]
fn mountain_river<'py>(
    py: Python<'py>,
    mu: &PyMeasure,
    beta: &str,
    k: u32,
    alpha: &str,
    rho: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let params = RiverParams::new(rat(beta)?, rat(alpha)?, rat(rho)?).map_err(to_py_err)?;
    let out = martingale::mountain_river_search(&mu.inner, &params, k).map_err(to_py_err)?;
    to_dict(py, &out)
}

/// Runs the `h_n` witness pipeline and returns its report.
#[pyfunction]
#[pyo3(signature = (mu, beta, alpha="-3/4", rho="3/4", eta="1/1000"))]
fn witness<'py>(
    py: Python<'py>,
    mu: &PyMeasure,
    beta: &str,
    alpha: &str,
    rho: &str,
    eta: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let r = testfn::witness_pipeline(&mu.inner, &rat(beta)?, &rat(alpha)?, &rat(rho)?, &rat(eta)?).map_err(to_py_err)?;
    to_dict(py, &r)
}

/// `(‖h_n‖₁, ∫h_n, ‖h_n‖∞)` as exact strings.
#[pyfunction]
fn hn_norms(n: u32, epsilon: &str) -> PyResult<(String, String, String)> {
    let h = testfn::make_hn(n, &rat(epsilon)?, testfn::Orientation::Reflected).map_err(to_py_err)?;
    let s = rational::to_fraction_string;
    Ok((s(&h.l1()), s(&h.integral()), s(&h.linf())))
}

#[pyfunction]
fn riesz_coefficient(kmax: u32, n: i64) -> String {
    rational::to_fraction_string(&fourier::riesz_coefficient(kmax, n))
}

/// Walsh coefficients grouped by `max A`: `groups[n-1]` holds the `2^{n-1}` values.
#[pyfunction]
fn walsh_groups(mu: &PyMeasure, n_max: u32) -> PyResult<Vec<Vec<String>>> {
    let e = walsh::walsh_coeffs(&mu.inner, n_max).map_err(to_py_err)?;
    (1..=n_max)
        .map(|n| {
            let g = e.group(n).map_err(to_py_err)?;
            Ok(g.iter().map(rational::to_fraction_string).collect())
        })
        .collect()
}

#[pyfunction]
fn haar_coeffs(mu: &PyMeasure, n: u32) -> PyResult<Vec<String>> {
    let c = walsh::haar_coeffs(&mu.inner, n).map_err(to_py_err)?;
    Ok(c.iter().map(rational::to_fraction_string).collect())
}

#[pyfunction]
fn lorentz_norm(values: Vec<f64>, k: u64) -> f64 {
    walsh::lorentz_norm_f64(&values, k)
}

/// Runs the command line in-process; returns `(exit_code, stdout, stderr)`.
#[pyfunction]
fn run_cli(argv: Vec<String>) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = spectra::cli::run_with(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}

#[pymodule]
fn dyadic_spectra(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMeasure>()?;
    m.add_function(wrap_pyfunction!(c_beta, m)?)?;
    m.add_function(wrap_pyfunction!(mountain_river, m)?)?;
    m.add_function(wrap_pyfunction!(witness, m)?)?;
    m.add_function(wrap_pyfunction!(hn_norms, m)?)?;
    m.add_function(wrap_pyfunction!(riesz_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(walsh_groups, m)?)?;
    m.add_function(wrap_pyfunction!(haar_coeffs, m)?)?;
    m.add_function(wrap_pyfunction!(lorentz_norm, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", spectra::cli::version())?;
    Ok(())
}
