//! Python bindings: `import psimix`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use psimix::copula::{self, CopulaSpec};
use psimix::experiment::{self, ExperimentConfig};
use psimix::sampler::{self, MarginalSpec};
use psimix::{mixing, robust, Error, Rect};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::InvalidSpec(_) | Error::Config(_) | Error::Json(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for psimix::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Serializes through JSON into plain Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn marginal(mu: Option<f64>, sigma: Option<f64>) -> PyResult<MarginalSpec> {
    match (mu, sigma) {
        (None, None) => Ok(MarginalSpec::Uniform01),
        (mu, sigma) => MarginalSpec::normal(mu.unwrap_or(0.0), sigma.unwrap_or(1.0)).py(),
    }
}

/// A bivariate copula.
#[pyclass(name = "Copula", module = "psimix", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyCopula(CopulaSpec);

#[pymethods]
impl PyCopula {
    #[staticmethod]
    fn independence() -> Self {
        Self(CopulaSpec::independence())
    }

    #[staticmethod]
    fn m() -> Self {
        Self(CopulaSpec::m())
    }

    #[staticmethod]
    fn w() -> Self {
        Self(CopulaSpec::w())
    }

    #[staticmethod]
    fn fgm(theta: f64) -> PyResult<Self> {
        CopulaSpec::fgm(theta).map(Self).py()
    }

    #[staticmethod]
    fn mardia(a: f64, b: f64) -> PyResult<Self> {
        CopulaSpec::mardia(a, b).map(Self).py()
    }

    #[staticmethod]
    fn frechet(theta: f64) -> PyResult<Self> {
        CopulaSpec::frechet(theta).map(Self).py()
    }

    #[staticmethod]
    fn gaussian(r: f64) -> PyResult<Self> {
        CopulaSpec::gaussian(r).map(Self).py()
    }

    #[staticmethod]
    fn amh(theta: f64) -> PyResult<Self> {
        CopulaSpec::amh(theta).map(Self).py()
    }

    #[staticmethod]
    fn convex(weights: Vec<f64>, components: Vec<PyCopula>) -> PyResult<Self> {
        CopulaSpec::convex(weights, components.into_iter().map(|c| c.0).collect())
            .map(Self)
            .py()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        CopulaSpec::from_json(text).map(Self).py()
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label()
    }

    fn cdf(&self, u: f64, v: f64) -> PyResult<f64> {
        copula::cdf(&self.0, u, v).py()
    }

    fn density(&self, u: f64, v: f64) -> PyResult<f64> {
        copula::density(&self.0, u, v).py()
    }

    /// `P(X₁ ≤ v | X₀ = u)`.
    fn conditional_cdf(&self, u: f64, v: f64) -> PyResult<f64> {
        copula::conditional_cdf(&self.0, u, v).py()
    }

    fn rectangle_probability(&self, u_lo: f64, u_hi: f64, v_lo: f64, v_hi: f64) -> PyResult<f64> {
        let r = Rect::new(u_lo, u_hi, v_lo, v_hi).py()?;
        copula::rectangle_probability(&self.0, &r).py()
    }

    /// Midpoint grid of the density as a list of rows.
    fn density_grid(&self, m: usize) -> PyResult<Vec<Vec<f64>>> {
        let g = copula::density_grid(&self.0, m).py()?;
        Ok(g.values().chunks(m).map(<[f64]>::to_vec).collect())
    }

    fn fold(&self, other: &PyCopula) -> Self {
        Self(copula::fold(&self.0, &other.0))
    }

    fn n_fold(&self, n: u32) -> PyResult<Self> {
        copula::n_fold(&self.0, n).map(Self).py()
    }

    fn perturb_pi(&self, alpha: f64) -> PyResult<Self> {
        copula::perturb_pi(&self.0, alpha).map(Self).py()
    }

    fn perturb_m(&self, alpha: f64) -> PyResult<Self> {
        copula::perturb_m(&self.0, alpha).map(Self).py()
    }

    fn check_axioms<'py>(&self, py: Python<'py>, resolution: usize) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &copula::check_copula_axioms(&self.0, resolution).py()?)
    }

    fn __repr__(&self) -> String {
        format!("Copula({})", self.0.to_json())
    }
}

/// A simulated chain: `uniforms` on (0, 1) and `values = G⁻¹(uniforms)`.
#[pyclass(name = "ChainSample", module = "psimix", frozen, get_all)]
struct PyChainSample {
    seed: u64,
    uniforms: Vec<f64>,
    values: Vec<f64>,
}

#[pyfunction]
#[pyo3(signature = (copula, n, seed, mu=None, sigma=None))]
fn sample_chain(
    copula: &PyCopula,
    n: usize,
    seed: u64,
    mu: Option<f64>,
    sigma: Option<f64>,
) -> PyResult<PyChainSample> {
    let m = marginal(mu, sigma)?;
    let s = sampler::sample_chain(&copula.0, n, seed).py()?;
    let s = sampler::apply_marginal(s, m).py()?;
    Ok(PyChainSample {
        seed: s.seed,
        uniforms: s.uniforms,
        values: s.values,
    })
}

#[pyfunction]
fn sample_iid_normal(n: usize, seed: u64) -> Vec<f64> {
    sampler::sample_iid_normal(n, seed)
}

#[pyfunction]
fn density_extrema<'py>(
    py: Python<'py>,
    copula: &PyCopula,
    n: u32,
    m: usize,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &mixing::density_extrema(&copula.0, n, m).py()?)
}

#[pyfunction]
fn corner_divergence_scan<'py>(
    py: Python<'py>,
    copula: &PyCopula,
    n: u32,
    eps: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &mixing::corner_divergence_scan(&copula.0, n, &eps).py()?)
}

/// Mixing report for lags `1..=n_max` as a dict.
#[pyfunction]
#[pyo3(signature = (copula, resolution=256, n_max=4))]
fn classify<'py>(
    py: Python<'py>,
    copula: &PyCopula,
    resolution: usize,
    n_max: u32,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &mixing::classify(&copula.0, resolution, n_max).py()?)
}

#[pyfunction]
#[pyo3(signature = (y, x, level=0.95))]
fn robust_mean<'py>(
    py: Python<'py>,
    y: Vec<f64>,
    x: Vec<f64>,
    level: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &robust::robust_mean(&y, &x, level).py()?)
}

#[pyfunction]
#[pyo3(signature = (copula, n, seed, mu=30.0, sigma=1.0, level=0.95))]
fn study_replication<'py>(
    py: Python<'py>,
    copula: &PyCopula,
    n: usize,
    seed: u64,
    mu: f64,
    sigma: f64,
    level: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let m = MarginalSpec::normal(mu, sigma).py()?;
    to_py(py, &robust::study_replication(&copula.0, &m, n, level, seed).py()?)
}

#[pyfunction]
#[pyo3(signature = (copula, n, reps, seed, mu=30.0, sigma=1.0, level=0.95))]
fn coverage_experiment(
    copula: &PyCopula,
    n: usize,
    reps: u64,
    seed: u64,
    mu: f64,
    sigma: f64,
    level: f64,
) -> PyResult<f64> {
    let m = MarginalSpec::normal(mu, sigma).py()?;
    robust::coverage_experiment(&copula.0, &m, n, reps, level, seed).py()
}

/// Study table rows for an experiment config given as JSON text.
#[pyfunction]
#[pyo3(signature = (config_json, seed=None))]
fn table4<'py>(
    py: Python<'py>,
    config_json: &str,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::from_json(config_json).py()?;
    let rows = experiment::table4(&cfg, seed.unwrap_or(cfg.seed)).py()?;
    to_py(py, &rows)
}

#[pymodule]
#[pyo3(name = "psimix")]
fn psimix_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCopula>()?;
    m.add_class::<PyChainSample>()?;
    m.add_function(wrap_pyfunction!(sample_chain, m)?)?;
    m.add_function(wrap_pyfunction!(sample_iid_normal, m)?)?;
    m.add_function(wrap_pyfunction!(density_extrema, m)?)?;
    m.add_function(wrap_pyfunction!(corner_divergence_scan, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(robust_mean, m)?)?;
    m.add_function(wrap_pyfunction!(study_replication, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(table4, m)?)?;
    Ok(())
}
