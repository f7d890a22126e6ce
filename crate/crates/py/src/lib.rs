//! Python bindings: samples, estimators, the simulation designs and the
//! experiment runner.

use copulaqr::cqr::{cv_prediction_error, fit_estimator, EstimatorConfig, QuantileEstimator};
use copulaqr::paircop::PairFamily;
use copulaqr::simlab::{self, CensoringLevel, DgpSpec, DgpTag, EstimatorSpec, ExperimentConfig};
use copulaqr::stats::Probability;
use copulaqr::survival::{CensoringKind, ObservedSample};
use copulaqr::vine::CopulaMode;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn level(tau: f64) -> PyResult<Probability> {
    Probability::level(tau).map_err(value_err)
}

fn config(mode: &str, censoring: &str, families: Option<Vec<String>>, seed: u64) -> PyResult<EstimatorConfig> {
    let mut config = EstimatorConfig {
        mode: mode.parse::<CopulaMode>().map_err(value_err)?,
        censoring: censoring.parse::<CensoringKind>().map_err(value_err)?,
        ..EstimatorConfig::default()
    };
    if let Some(names) = families {
        config.vine.families = names
            .iter()
            .map(|s| s.parse::<PairFamily>().map_err(value_err))
            .collect::<PyResult<_>>()?;
    }
    if let copulaqr::paircop::BandwidthChoice::NearestNeighbor { seed: s, .. } = &mut config.vine.smoother.bandwidth {
        *s = seed;
    }
    Ok(config)
}

/// Observed responses `y`, event indicators `delta` and covariate rows `x`.
#[pyclass(name = "Sample", module = "copulaqr", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySample(ObservedSample);

#[pymethods]
impl PySample {
    #[new]
    #[pyo3(signature = (y, x, delta=None))]
    fn new(y: Vec<f64>, x: Vec<Vec<f64>>, delta: Option<Vec<bool>>) -> PyResult<Self> {
        let sample = match delta {
            Some(d) => ObservedSample::new(y, d, x),
            None => ObservedSample::complete(y, x),
        };
        sample.map(Self).map_err(value_err)
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.0.y().to_vec()
    }

    #[getter]
    fn delta(&self) -> Vec<bool> {
        self.0.delta().to_vec()
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        self.0.rows().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn events(&self) -> usize {
        self.0.events()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Sample(n={}, d={}, events={})", self.0.len(), self.0.dim(), self.0.events())
    }
}

/// A fitted conditional quantile estimator.
#[pyclass(name = "Estimator", module = "copulaqr", frozen)]
struct PyEstimator(QuantileEstimator);

#[pymethods]
impl PyEstimator {
    /// Fits on `sample`. `mode` is SP, P or NP; `censoring` is none, km, cox
    /// or cox-breslow.
    #[staticmethod]
    #[pyo3(signature = (sample, mode="SP", censoring="km", families=None, seed=0))]
    fn fit(
        py: Python<'_>,
        sample: &PySample,
        mode: &str,
        censoring: &str,
        families: Option<Vec<String>>,
        seed: u64,
    ) -> PyResult<Self> {
        let config = config(mode, censoring, families, seed)?;
        let sample = sample.0.clone();
        py.detach(|| fit_estimator(&sample, &config)).map(Self).map_err(value_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self).map_err(value_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(value_err)
    }

    fn predict(&self, x: Vec<f64>, tau: f64) -> PyResult<f64> {
        self.0.predict(&x, level(tau)?).map_err(value_err)
    }

    /// Quantile curve at `x` over the levels `taus`.
    fn predict_curve(&self, x: Vec<f64>, taus: Vec<f64>) -> PyResult<Vec<f64>> {
        let taus = taus.into_iter().map(level).collect::<PyResult<Vec<_>>>()?;
        self.0.predict_curve(&x, &taus).map(|c| c.values).map_err(value_err)
    }

    fn weights(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.weights(&x).map_err(value_err)
    }

    #[getter]
    fn event_values(&self) -> Vec<f64> {
        self.0.event_values().to_vec()
    }

    /// JSON description of the selected vine.
    fn describe(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.0.vine().describe()).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        let c = self.0.config();
        format!("Estimator(mode={}, censoring={}, n={})", c.mode, c.censoring, self.0.sample().len())
    }
}

/// One of the simulation designs at a sample size and censoring level.
#[pyclass(name = "DgpSpec", module = "copulaqr", frozen)]
struct PyDgpSpec(DgpSpec);

#[pymethods]
impl PyDgpSpec {
    #[new]
    #[pyo3(signature = (dgp, n, censoring=0.0))]
    fn new(dgp: &str, n: usize, censoring: f64) -> PyResult<Self> {
        let tag: DgpTag = dgp.parse().map_err(value_err)?;
        let level = CensoringLevel::from_fraction(censoring).map_err(value_err)?;
        DgpSpec::new(tag, n, level).map(Self).map_err(value_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Draws one sample with the given seed.
    fn simulate(&self, seed: u64) -> PyResult<PySample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        simlab::gen_dgp(&self.0, &mut rng).map(|g| PySample(g.sample)).map_err(value_err)
    }

    fn true_quantile(&self, x: Vec<f64>, tau: f64) -> PyResult<f64> {
        simlab::true_quantile(&self.0, &x, level(tau)?).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("DgpSpec({}, n={}, censoring={})", self.0.tag, self.0.n, self.0.censoring)
    }
}

/// Leave-one-out prediction error of the estimator configuration at `tau`.
#[pyfunction]
#[pyo3(signature = (sample, tau, mode="SP", censoring="km", seed=0))]
fn prediction_error(py: Python<'_>, sample: &PySample, tau: f64, mode: &str, censoring: &str, seed: u64) -> PyResult<f64> {
    let config = config(mode, censoring, None, seed)?;
    let tau = level(tau)?;
    let sample = sample.0.clone();
    py.detach(|| cv_prediction_error(&sample, tau, &config)).map_err(value_err)
}

/// Runs a Monte Carlo experiment and returns its metrics table as CSV.
#[pyfunction]
#[pyo3(signature = (dgp, n, censoring, taus, modes, replications=100, seed=0, censoring_model="km", cox_ref=false))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    dgp: &str,
    n: usize,
    censoring: f64,
    taus: Vec<f64>,
    modes: Vec<String>,
    replications: usize,
    seed: u64,
    censoring_model: &str,
    cox_ref: bool,
) -> PyResult<String> {
    let spec = PyDgpSpec::new(dgp, n, censoring)?.0;
    let taus = taus.into_iter().map(level).collect::<PyResult<Vec<_>>>()?;
    let mut estimators = modes
        .iter()
        .map(|m| config(m, censoring_model, None, seed).map(EstimatorSpec::Copula))
        .collect::<PyResult<Vec<_>>>()?;
    if cox_ref {
        estimators.push(EstimatorSpec::CoxReference);
    }
    let config = ExperimentConfig::new(spec, taus, estimators, replications, seed);
    py.detach(|| simlab::run_experiment(&config))
        .map(|r| r.to_csv())
        .map_err(value_err)
}

/// Gaussian versus nonparametric copula fit on the curved median design.
/// Returns a dict of lists plus the two mean squared errors.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn dette_demo<'py>(py: Python<'py>, seed: u64) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let demo = py
        .detach(|| simlab::dette_demo(seed, &Default::default()))
        .map_err(value_err)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("x", &demo.grid)?;
    out.set_item("truth", &demo.truth)?;
    out.set_item("parametric", &demo.parametric)?;
    out.set_item("nonparametric", &demo.nonparametric)?;
    out.set_item("mse_parametric", demo.mse_parametric())?;
    out.set_item("mse_nonparametric", demo.mse_nonparametric())?;
    Ok(out)
}

#[pymodule(name = "copulaqr")]
fn copulaqr_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySample>()?;
    m.add_class::<PyEstimator>()?;
    m.add_class::<PyDgpSpec>()?;
    m.add_function(wrap_pyfunction!(prediction_error, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(dette_demo, m)?)?;
    Ok(())
}
