//! Python bindings: panels, simulation, the asymptotic and randomization
//! tests, and the experiment harness.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use spectest::harness::{run_experiment as run_experiment_core, to_csv, ExperimentConfig};
use spectest::randomization::resolve_bandwidth;
use spectest::{
    Analysis as CoreAnalysis, AnalysisOptions, BandwidthSpec, Innovation, Kernel, RandomizationConfig,
    RandomizationKind, SpectestError, TestReport, TimeSeriesPanel,
};

fn to_py(err: SpectestError) -> PyErr {
    match err {
        SpectestError::Io { .. } | SpectestError::Experiment(_) => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn report_to_dict<'py>(py: Python<'py>, report: &TestReport) -> PyResult<Bound<'py, PyDict>> {
    let text = serde_json::to_string(report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let value = py.import("json")?.call_method1("loads", (text,))?;
    Ok(value.cast_into::<PyDict>()?)
}

fn bandwidth_spec(h: Option<f64>, cv_mult: f64) -> BandwidthSpec {
    match h {
        Some(h) => BandwidthSpec::Fixed(h),
        None => BandwidthSpec::CrossValidated {
            multiplier: cv_mult,
            candidates: None,
        },
    }
}

/// An `n × (p·q)` real panel; group `k` holds columns `k·p .. (k+1)·p`.
#[pyclass(name = "Panel", module = "spectest_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Panel {
    inner: TimeSeriesPanel,
}

#[pymethods]
impl Panel {
    #[new]
    fn new(rows: Vec<Vec<f64>>, p: usize, q: usize) -> PyResult<Self> {
        Ok(Self {
            inner: TimeSeriesPanel::from_rows(&rows, p, q).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_csv(path: std::path::PathBuf, p: usize, q: usize) -> PyResult<Self> {
        Ok(Self {
            inner: TimeSeriesPanel::read_csv_path(&path, p, q).map_err(to_py)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn q(&self) -> usize {
        self.inner.q()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        let data = self.inner.data();
        (0..data.nrows()).map(|t| data.row(t).iter().copied().collect()).collect()
    }

    fn demean(&self) -> Self {
        Self {
            inner: spectest::demean(&self.inner),
        }
    }

    fn regroup(&self, p: usize, q: usize) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.clone().regroup(p, q).map_err(to_py)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Panel(n={}, p={}, q={})", self.inner.n(), self.inner.p(), self.inner.q())
    }
}

/// Periodogram, smoothed estimate, statistic and centering estimates.
#[pyclass(name = "Analysis", module = "spectest_py", frozen)]
struct Analysis {
    inner: CoreAnalysis,
}

#[pymethods]
impl Analysis {
    #[new]
    #[pyo3(signature = (panel, h=None, cv_mult=1.0, kernel="bartlett-priestley"))]
    fn new(panel: &Panel, h: Option<f64>, cv_mult: f64, kernel: &str) -> PyResult<Self> {
        let kernel = Kernel::by_name(kernel).map_err(to_py)?;
        let bandwidth = resolve_bandwidth(&panel.inner, &kernel, &bandwidth_spec(h, cv_mult), true).map_err(to_py)?;
        let inner = CoreAnalysis::new(&panel.inner, &kernel, bandwidth, &AnalysisOptions::default()).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn t_n(&self) -> f64 {
        self.inner.statistic().t_n
    }

    #[getter]
    fn mu_hat(&self) -> f64 {
        self.inner.centering().mu_hat
    }

    #[getter]
    fn tau_hat_sq(&self) -> f64 {
        self.inner.centering().tau_hat_sq
    }

    #[getter]
    fn mu_hat_star(&self) -> f64 {
        self.inner.centering().mu_hat_star
    }

    #[getter]
    fn tau_hat_star_sq(&self) -> f64 {
        self.inner.centering().tau_hat_star_sq
    }

    fn asymptotic_test<'py>(&self, py: Python<'py>, alpha: f64) -> PyResult<Bound<'py, PyDict>> {
        report_to_dict(py, &self.inner.asymptotic_test(alpha).map_err(to_py)?)
    }

    /// `T_n*` for `draws` seeded permutation families.
    #[pyo3(signature = (draws, seed, workers=None))]
    fn draw_statistics(&self, py: Python<'_>, draws: usize, seed: u64, workers: Option<usize>) -> PyResult<Vec<f64>> {
        py.detach(|| self.inner.draw_statistics(draws, seed, workers)).map_err(to_py)
    }
}

fn kind_from(name: &str) -> PyResult<RandomizationKind> {
    match name {
        "uncentered" => Ok(RandomizationKind::Uncentered),
        "centered" => Ok(RandomizationKind::Centered),
        "studentized" => Ok(RandomizationKind::Studentized),
        other => Err(PyValueError::new_err(format!("unknown kind {other:?}"))),
    }
}

/// Runs a randomization test and returns its report as a dict.
#[pyfunction]
#[pyo3(signature = (panel, kind="studentized", draws=300, alpha=0.05, seed=42, h=None, cv_mult=1.0, workers=None))]
#[allow(clippy::too_many_arguments)]
fn randomization_test<'py>(
    py: Python<'py>,
    panel: &Panel,
    kind: &str,
    draws: usize,
    alpha: f64,
    seed: u64,
    h: Option<f64>,
    cv_mult: f64,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut config = RandomizationConfig::new(
        kind_from(kind)?,
        draws,
        alpha,
        seed,
        spectest::bartlett_priestley(),
        bandwidth_spec(h, cv_mult),
    );
    config.workers = workers;
    let report = py
        .detach(|| spectest::run_randomization_test(&panel.inner, &config))
        .map_err(to_py)?;
    report_to_dict(py, &report)
}

/// Simulates a named benchmark model.
#[pyfunction]
#[pyo3(signature = (model, n, seed, innovation="gaussian"))]
fn simulate(model: &str, n: usize, seed: u64, innovation: &str) -> PyResult<Panel> {
    let law = Innovation::by_name(innovation).map_err(to_py)?;
    let spec = spectest::preset_with(model, law).map_err(to_py)?;
    Ok(Panel {
        inner: spectest::simulate(&spec, n, seed).map_err(to_py)?,
    })
}

/// `(A_K, B_K)` of a built-in kernel.
#[pyfunction]
#[pyo3(signature = (name="bartlett-priestley"))]
fn kernel_constants(name: &str) -> PyResult<(f64, f64)> {
    let k = Kernel::by_name(name).map_err(to_py)?;
    Ok((k.a_k(), k.b_k()))
}

/// Permutations `π_0 … π_{⌊n/2⌋}` (0-based labels).
#[pyfunction]
fn sample_family(q: usize, n: usize, seed: u64) -> PyResult<Vec<Vec<usize>>> {
    Ok(spectest::sample_family(q, n, seed).map_err(to_py)?.base().to_vec())
}

#[pyfunction]
fn normal_quantile(p: f64) -> PyResult<f64> {
    spectest::normal_quantile(p).map_err(to_py)
}

/// Runs an experiment described by config text and returns the CSV table.
#[pyfunction]
#[pyo3(signature = (config, workers=None))]
fn run_experiment(py: Python<'_>, config: &str, workers: Option<usize>) -> PyResult<String> {
    let config = ExperimentConfig::parse(config).map_err(to_py)?;
    let table = py.detach(|| run_experiment_core(&config, workers)).map_err(to_py)?;
    Ok(to_csv(&table))
}

#[pymodule]
fn spectest_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Panel>()?;
    m.add_class::<Analysis>()?;
    m.add_function(wrap_pyfunction!(randomization_test, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_constants, m)?)?;
    m.add_function(wrap_pyfunction!(sample_family, m)?)?;
    m.add_function(wrap_pyfunction!(normal_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
