//! Python bindings for `fockshift`.
//!
//! Distributions and density matrices are exposed as small wrapper classes;
//! scenario runs take TOML text and return the same JSON the CLI prints.

use fockshift::bayes;
use fockshift::fock::{self, FockDimension, C64};
use fockshift::run;
use fockshift::scenario::{OutputFormat, Scenario, ScenarioError};
use fockshift::statistics::{self, StateFamily};
use fockshift::superops::{self, CouplingParams, DetectorEfficiency, ShiftDirection};
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: fockshift::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scenario_err(e: ScenarioError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dim(d: usize) -> PyResult<FockDimension> {
    FockDimension::new(d).map_err(err)
}

/// Photon-number distribution p(n), n = 0..dim-1.
#[pyclass(name = "Distribution", module = "fockshift_py", frozen)]
struct Distribution(fock::PhotonDistribution);

#[pymethods]
impl Distribution {
    #[new]
    fn new(p: Vec<f64>) -> PyResult<Self> {
        fock::PhotonDistribution::new(p).map(Self).map_err(err)
    }

    /// Normalizes nonnegative weights.
    #[staticmethod]
    fn from_weights(weights: Vec<f64>) -> PyResult<Self> {
        fock::PhotonDistribution::from_weights(weights).map(Self).map_err(err)
    }

    #[staticmethod]
    fn fock(n: usize, dim: usize) -> PyResult<Self> {
        fock::PhotonDistribution::fock(n, self::dim(dim)?).map(Self).map_err(err)
    }

    #[getter]
    fn probabilities(&self) -> Vec<f64> {
        self.0.probabilities().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean()
    }

    #[getter]
    fn vacuum_probability(&self) -> f64 {
        self.0.vacuum_probability()
    }

    /// `(mean, variance, vacuum_prob)`.
    fn moments(&self) -> (f64, f64, f64) {
        let s = statistics::moments(&self.0);
        (s.mean, s.variance, s.vacuum_prob)
    }

    fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __getitem__(&self, n: usize) -> PyResult<f64> {
        self.0
            .probabilities()
            .get(n)
            .copied()
            .ok_or_else(|| pyo3::exceptions::PyIndexError::new_err(n))
    }

    fn __repr__(&self) -> String {
        format!("Distribution(dim={}, mean={:.6})", self.0.len(), self.0.mean())
    }
}

/// Density matrix in the truncated number basis.
#[pyclass(name = "DensityMatrix", module = "fockshift_py", frozen)]
struct DensityMatrix(fock::DensityMatrix);

#[pymethods]
impl DensityMatrix {
    /// Row-major square matrix of complex entries.
    #[new]
    fn new(rows: Vec<Vec<C64>>) -> PyResult<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err("density matrix must be square"));
        }
        let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        fock::DensityMatrix::new(m).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_distribution(p: &Distribution) -> Self {
        Self(fock::DensityMatrix::from_distribution(&p.0))
    }

    /// Pure state from (unnormalized) amplitudes.
    #[staticmethod]
    fn pure(amplitudes: Vec<C64>) -> PyResult<Self> {
        fock::DensityMatrix::pure(&amplitudes).map(Self).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim().get()
    }

    fn trace(&self) -> f64 {
        self.0.trace()
    }

    fn populations(&self) -> Vec<f64> {
        self.0.populations()
    }

    fn max_off_diagonal(&self) -> f64 {
        self.0.max_off_diagonal()
    }

    /// Row-major entries.
    fn entries(&self) -> Vec<Vec<C64>> {
        let m = self.0.matrix();
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
    }

    /// Diagonal part; fails if coherences exceed `tol`.
    #[pyo3(signature = (tol = 1e-10))]
    fn diagonal(&self, tol: f64) -> PyResult<Distribution> {
        self.0.diagonal_part(tol).map(Distribution).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(dim={}, trace={:.6})", self.0.dim().get(), self.0.trace())
    }
}

fn lift(p: &Distribution) -> fock::DensityMatrix {
    fock::DensityMatrix::from_distribution(&p.0)
}

fn lower(rho: fockshift::Result<fock::DensityMatrix>) -> PyResult<Distribution> {
    rho.and_then(|r| r.diagonal_part(superops::DIAGONAL_TOL)).map(Distribution).map_err(err)
}

fn direction(s: &str) -> PyResult<ShiftDirection> {
    match s {
        "subtract" => Ok(ShiftDirection::Subtract),
        "add" => Ok(ShiftDirection::Add),
        _ => Err(PyValueError::new_err(format!("unknown direction {s:?}; expected \"subtract\" or \"add\""))),
    }
}

/// Truncated standard state: `family` is "fock", "thermal" or "poisson".
/// Returns `(distribution, discarded_tail_mass)`.
#[pyfunction]
#[pyo3(signature = (family, dim, *, mean = None, n = None))]
fn make_state(family: &str, dim: usize, mean: Option<f64>, n: Option<usize>) -> PyResult<(Distribution, f64)> {
    let need_mean = || mean.ok_or_else(|| PyValueError::new_err(format!("{family} state needs `mean`")));
    let family = match family {
        "fock" => StateFamily::Fock {
            n: n.ok_or_else(|| PyValueError::new_err("fock state needs `n`"))?,
        },
        "thermal" => StateFamily::Thermal { mean: need_mean()? },
        "poisson" => StateFamily::Poisson { mean: need_mean()? },
        other => return Err(PyValueError::new_err(format!("unknown state family {other:?}"))),
    };
    let s = statistics::make_state(&family, self::dim(dim)?).map_err(err)?;
    Ok((Distribution(s.distribution), s.tail_mass))
}

/// `<n>/(1 - p0) - 1`.
#[pyfunction]
fn predict_discrete_mean(p: &Distribution) -> PyResult<f64> {
    statistics::predict_discrete_mean(&statistics::moments(&p.0)).map_err(err)
}

/// `<n> - 1 + Var(n)/<n>`.
#[pyfunction]
fn predict_continuous_mean(p: &Distribution) -> PyResult<f64> {
    statistics::predict_continuous_mean(&statistics::moments(&p.0)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (p, n = 1))]
fn subtract(p: &Distribution, n: usize) -> PyResult<Distribution> {
    lower(superops::subtract_n(&lift(p), n))
}

#[pyfunction]
#[pyo3(signature = (p, n = 1))]
fn add(p: &Distribution, n: usize) -> PyResult<Distribution> {
    lower(superops::add_n(&lift(p), n))
}

#[pyfunction]
fn one_count(p: &Distribution) -> PyResult<Distribution> {
    lower(superops::one_count_j(&lift(p)))
}

#[pyfunction]
#[pyo3(signature = (p, tau, coupling = 1.0))]
fn no_count(p: &Distribution, tau: f64, coupling: f64) -> PyResult<Distribution> {
    let params = CouplingParams::new(coupling, tau).map_err(err)?;
    lower(superops::no_count_s(&lift(p), &params))
}

/// Mixture of N-photon shifts; `weights` is a list of `(N, alpha_N)`.
#[pyfunction]
#[pyo3(signature = (p, weights, direction = "subtract"))]
fn imperfect(p: &Distribution, weights: Vec<(usize, f64)>, direction: &str) -> PyResult<Distribution> {
    let eff = DetectorEfficiency::new(weights, self::direction(direction)?).map_err(err)?;
    lower(superops::imperfect_detection(&lift(p), &eff))
}

#[pyfunction]
fn phase_shift(rho: &DensityMatrix, phi: f64) -> PyResult<DensityMatrix> {
    superops::phase_shift(&rho.0, phi).map(DensityMatrix).map_err(err)
}

/// One-count map on a full density matrix (keeps coherences).
#[pyfunction]
fn one_count_matrix(rho: &DensityMatrix) -> PyResult<DensityMatrix> {
    superops::one_count_j(&rho.0).map(DensityMatrix).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (rho, tau, coupling = 1.0))]
fn no_count_matrix(rho: &DensityMatrix, tau: f64, coupling: f64) -> PyResult<DensityMatrix> {
    let params = CouplingParams::new(coupling, tau).map_err(err)?;
    superops::no_count_s(&rho.0, &params).map(DensityMatrix).map_err(err)
}

/// Bayes update for "n >= 1 was present" followed by removal of one photon.
#[pyfunction]
fn discrete_posterior(p: &Distribution) -> PyResult<Distribution> {
    bayes::discrete_posterior(&p.0).map(Distribution).map_err(err)
}

/// Bayes update with likelihood proportional to n, then removal of one photon.
#[pyfunction]
fn continuous_posterior(p: &Distribution) -> PyResult<Distribution> {
    bayes::continuous_posterior(&p.0).map(Distribution).map_err(err)
}

/// Bayes update with an arbitrary per-level likelihood in [0, 1].
#[pyfunction]
fn posterior(p: &Distribution, likelihood: Vec<f64>) -> PyResult<Distribution> {
    let model = bayes::ConditionalModel::new(likelihood).map_err(err)?;
    bayes::posterior(&p.0, &model).map(Distribution).map_err(err)
}

/// Checks a scenario; raises ValueError naming the offending field.
#[pyfunction]
fn validate_scenario(toml: &str) -> PyResult<()> {
    Scenario::parse(toml).and_then(|s| s.validate()).map_err(scenario_err)
}

/// Runs the operation list of a scenario and returns the JSON report.
#[pyfunction]
fn run_pipeline(toml: &str) -> PyResult<String> {
    let s = Scenario::parse(toml).map_err(scenario_err)?;
    let report = run::run_pipeline(&s).map_err(scenario_err)?;
    run::render_pipeline(&report, OutputFormat::Json).map_err(scenario_err)
}

/// Runs the Monte Carlo campaign of a scenario and returns the JSON report.
/// Releases the GIL while the trials run.
#[pyfunction]
#[pyo3(signature = (toml, threads = 0, seed = None))]
fn run_campaign(py: Python<'_>, toml: &str, threads: usize, seed: Option<u64>) -> PyResult<String> {
    let mut s = Scenario::parse(toml).map_err(scenario_err)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let report = py
        .detach(|| run::run_campaign(&s, threads, false))
        .map_err(scenario_err)?
        .report;
    run::render_campaign(&report, OutputFormat::Json).map_err(scenario_err)
}

#[pymodule]
fn fockshift_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Distribution>()?;
    m.add_class::<DensityMatrix>()?;
    m.add_function(wrap_pyfunction!(make_state, m)?)?;
    m.add_function(wrap_pyfunction!(predict_discrete_mean, m)?)?;
    m.add_function(wrap_pyfunction!(predict_continuous_mean, m)?)?;
    m.add_function(wrap_pyfunction!(subtract, m)?)?;
    m.add_function(wrap_pyfunction!(add, m)?)?;
    m.add_function(wrap_pyfunction!(one_count, m)?)?;
    m.add_function(wrap_pyfunction!(no_count, m)?)?;
    m.add_function(wrap_pyfunction!(imperfect, m)?)?;
    m.add_function(wrap_pyfunction!(phase_shift, m)?)?;
    m.add_function(wrap_pyfunction!(one_count_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(no_count_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(discrete_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(continuous_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(posterior, m)?)?;
    m.add_function(wrap_pyfunction!(validate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
