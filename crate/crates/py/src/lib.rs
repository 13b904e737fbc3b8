//! Python bindings. Complex values cross the boundary as Python `complex`.

use haarlab::grid::GridSpec;
use haarlab::haar::{self, HaarCoefficients, SampledFunction, C64};
use haarlab::lab::{self, ExperimentConfig};
use haarlab::median::{self, WeightedPointSet};
use haarlab::norms::{self, LorentzIndex};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: haarlab::error::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Grid", module = "haarlab_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: GridSpec,
}

#[pymethods]
impl PyGrid {
    /// Unshifted d-adic system on [0,1) with `levels` generations.
    #[staticmethod]
    fn interval(d: usize, levels: usize) -> PyResult<Self> {
        GridSpec::interval(d, levels).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn unit_cube(n: usize, levels: usize) -> PyResult<Self> {
        GridSpec::unit_cube(n, levels).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(|inner| Self { inner }).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("grid serializes")
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn branching(&self) -> usize {
        self.inner.branching()
    }

    #[getter]
    fn levels(&self) -> usize {
        self.inner.levels()
    }

    fn __len__(&self) -> usize {
        self.inner.leaf_count()
    }

    fn __repr__(&self) -> String {
        format!("Grid({})", self.to_json())
    }
}

fn sampled(grid: &PyGrid, values: Vec<C64>) -> PyResult<SampledFunction> {
    SampledFunction::new(grid.inner.clone(), values).map_err(err)
}

/// Haar coefficients of leaf values, as (levels, average).
#[pyfunction]
fn analyze(grid: &PyGrid, values: Vec<C64>) -> PyResult<(Vec<Vec<C64>>, C64)> {
    let c = haar::analyze(&sampled(grid, values)?);
    let levels = (0..grid.inner.levels()).map(|k| c.level(k).to_vec()).collect();
    Ok((levels, c.average()))
}

#[pyfunction]
fn synthesize(grid: &PyGrid, levels: Vec<Vec<C64>>, average: C64) -> PyResult<Vec<C64>> {
    let mut c = HaarCoefficients::zeros(&grid.inner);
    if levels.len() != grid.inner.levels() {
        return Err(PyValueError::new_err(format!("expected {} levels, got {}", grid.inner.levels(), levels.len())));
    }
    for (k, row) in levels.iter().enumerate() {
        let dst = c.level_mut(k);
        if dst.len() != row.len() {
            return Err(PyValueError::new_err(format!("level {k}: expected {} coefficients", dst.len())));
        }
        dst.copy_from_slice(row);
    }
    c.set_average(average);
    Ok(haar::synthesize(&c).into_values())
}

/// Lorentz sequence norm; q = inf gives the weak space.
#[pyfunction]
#[pyo3(signature = (a, p, q=None))]
fn lorentz_norm(a: Vec<f64>, p: f64, q: Option<f64>) -> PyResult<f64> {
    let idx = LorentzIndex::new(p, q.unwrap_or(p)).map_err(err)?;
    Ok(norms::lorentz_norm(&a, idx))
}

#[pyfunction]
fn besov_norm(grid: &PyGrid, values: Vec<C64>, p: f64) -> PyResult<f64> {
    norms::besov_martingale(&sampled(grid, values)?, p).map_err(err)
}

#[pyfunction]
fn bmo_norm(grid: &PyGrid, values: Vec<C64>) -> PyResult<f64> {
    Ok(norms::bmo_martingale(&sampled(grid, values)?))
}

/// Complex median of weighted points: a dict with center, theta, certified, masses.
#[pyfunction]
#[pyo3(signature = (points, weights=None))]
fn complex_median<'py>(py: Python<'py>, points: Vec<C64>, weights: Option<Vec<f64>>) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let w = weights.unwrap_or_else(|| vec![1.0; points.len()]);
    let set = WeightedPointSet::new(points.iter().map(|z| [z.re, z.im]).collect(), w).map_err(err)?;
    let pair = median::complex_median(&set).map_err(err)?;
    let cert = median::certify(&set, &pair);
    let d = pyo3::types::PyDict::new(py);
    d.set_item("center", C64::new(pair.center[0], pair.center[1]))?;
    d.set_item("theta", pair.theta)?;
    d.set_item("certified", cert.certified)?;
    d.set_item("exact", cert.exact)?;
    d.set_item("masses", cert.masses.to_vec())?;
    Ok(d)
}

#[pyfunction]
fn experiment_names() -> Vec<&'static str> {
    lab::experiment_names()
}

/// Runs an experiment and returns its JSON report. `config` is a JSON
/// object in the same shape as the CLI config file.
#[pyfunction]
#[pyo3(signature = (name, seed, config=None))]
fn run_experiment(py: Python<'_>, name: &str, seed: u64, config: Option<&str>) -> PyResult<String> {
    let cfg = match config {
        Some(text) => ExperimentConfig::from_json(text).map_err(err)?,
        None => ExperimentConfig::named(name),
    };
    let mut cfg = cfg.with_seed(seed);
    cfg.experiment = name.to_string();
    let report = py.detach(|| lab::run_experiment(&cfg)).map_err(err)?;
    Ok(report.to_json())
}

#[pymodule]
fn haarlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(lorentz_norm, m)?)?;
    m.add_function(wrap_pyfunction!(besov_norm, m)?)?;
    m.add_function(wrap_pyfunction!(bmo_norm, m)?)?;
    m.add_function(wrap_pyfunction!(complex_median, m)?)?;
    m.add_function(wrap_pyfunction!(experiment_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
