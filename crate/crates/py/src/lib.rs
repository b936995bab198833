// pyo3 0.22 method wrappers trip this lint on every `PyResult` return.
#![allow(clippy::useless_conversion)]

use std::path::PathBuf;

use chrono::NaiveDate;
use etfcast::evaluation::{self, make_walk_forward};
use etfcast::features::{reconstruct_closes, DeltaSeries};
use etfcast::ingestion::{EtfId, Symbol};
use etfcast::models::checkpoint::{load_checkpoint, save_checkpoint, Checkpointable};
use etfcast::models::{
    ClassifierFamily, ClassifierSpec, FittedClassifier, FittedRegressor, Hyperparams, Param, RegressorFamily,
    RegressorSpec,
};
use etfcast::pipeline::{self, Layout, Stage};
use etfcast::sentiment::{coverage_pct, parse_score_response, MockLexiconClient};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(etfcast_py, ConfigError, PyException);
create_exception!(etfcast_py, PipelineError, PyException);
create_exception!(etfcast_py, ModelError, PyException);

fn pipeline_err(e: pipeline::PipelineError) -> PyErr {
    match e {
        pipeline::PipelineError::ConfigInvalid(m) => ConfigError::new_err(m),
        other => PipelineError::new_err((other.to_string(), other.exit_code())),
    }
}

fn model_err(e: impl std::fmt::Display) -> PyErr {
    ModelError::new_err(e.to_string())
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn hyperparams(d: Option<&Bound<'_, PyDict>>) -> PyResult<Hyperparams> {
    let mut h = Hyperparams::new();
    if let Some(d) = d {
        for (k, v) in d.iter() {
            let key: String = k.extract()?;
            let p = if let Ok(b) = v.extract::<bool>() {
                return Err(value_err(format!("{key}: booleans are not hyperparameters ({b})")));
            } else if let Ok(i) = v.extract::<i64>() {
                Param::Int(i)
            } else if let Ok(f) = v.extract::<f64>() {
                Param::Float(f)
            } else {
                Param::Text(v.extract::<String>()?)
            };
            h.insert(key, p);
        }
    }
    Ok(h)
}

fn series(deltas: Vec<f64>, sentiments: Option<Vec<f64>>) -> PyResult<DeltaSeries> {
    let n = deltas.len();
    let etf = EtfId {
        symbol: Symbol::new("PY").map_err(value_err)?,
        sector: "python".into(),
    };
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    DeltaSeries::from_deltas(etf, start, 100.0, deltas, sentiments.unwrap_or_else(|| vec![0.0; n])).map_err(value_err)
}

/// A validated run configuration loaded from TOML.
#[pyclass(name = "Config", module = "etfcast_py")]
#[derive(Clone)]
struct PyConfig {
    inner: pipeline::RunConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyConfig {
            inner: pipeline::RunConfig::load(&path).map_err(pipeline_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (text, base_dir = PathBuf::from(".")))]
    fn from_toml(text: &str, base_dir: PathBuf) -> PyResult<Self> {
        Ok(PyConfig {
            inner: pipeline::RunConfig::from_toml(text, base_dir).map_err(pipeline_err)?,
        })
    }

    #[getter]
    fn digest(&self) -> String {
        self.inner.digest()
    }

    #[getter]
    fn run_id(&self) -> String {
        self.inner.run_id()
    }

    #[getter]
    fn symbols(&self) -> Vec<String> {
        self.inner.symbols.clone()
    }

    #[getter]
    fn output_dir(&self) -> PathBuf {
        self.inner.resolve(&self.inner.output_dir)
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(run_id={:?}, symbols={:?})",
            self.inner.run_id(),
            self.inner.symbols
        )
    }
}

/// Resumable pipeline over one output directory.
#[pyclass(name = "Pipeline", module = "etfcast_py")]
struct PyPipeline {
    inner: pipeline::Pipeline,
}

#[pymethods]
impl PyPipeline {
    #[new]
    fn new(config: &PyConfig) -> PyResult<Self> {
        Ok(PyPipeline {
            inner: pipeline::Pipeline::new(config.inner.clone()).map_err(pipeline_err)?,
        })
    }

    /// Run every pending stage; returns `(exit_code, total_combos, failed_combos)`.
    #[pyo3(signature = (stop_after = None))]
    fn run(&self, py: Python<'_>, stop_after: Option<&str>) -> PyResult<(i32, usize, usize)> {
        let stop = stop_after.map(|s| s.parse::<Stage>()).transpose().map_err(value_err)?;
        let out = py.allow_threads(|| self.inner.run(stop)).map_err(pipeline_err)?;
        Ok((out.exit_code(), out.total_combos, out.failed_combos))
    }

    /// Run one stage; returns `(status, summary_json)`.
    fn run_stage(&self, py: Python<'_>, stage: &str) -> PyResult<(String, String)> {
        let stage = stage.parse::<Stage>().map_err(value_err)?;
        let entry = py.allow_threads(|| self.inner.run_stage(stage)).map_err(pipeline_err)?;
        Ok((entry.status, entry.summary.to_string()))
    }

    #[getter]
    fn completed_stages(&self) -> Vec<String> {
        self.inner
            .state()
            .completed_stages
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    #[getter]
    fn output_dir(&self) -> PathBuf {
        self.inner.layout().root().to_path_buf()
    }
}

/// Render the summary of a finished run directory; returns the text table.
#[pyfunction]
fn report(run_dir: PathBuf) -> PyResult<String> {
    let layout = Layout::new(run_dir);
    pipeline::report(&layout).map_err(pipeline_err)?;
    std::fs::read_to_string(layout.summary_text()).map_err(|e| PipelineError::new_err(e.to_string()))
}

/// Magnitude model fit on a delta series.
#[pyclass(name = "Regressor", module = "etfcast_py")]
struct PyRegressor {
    inner: FittedRegressor,
}

#[pymethods]
impl PyRegressor {
    /// Fit `family` on targets `lookback..train_end` of `deltas`.
    #[staticmethod]
    #[pyo3(signature = (family, deltas, train_end, sentiments = None, hyperparameters = None, uses_sentiment = false, lookback = 5, seed = 42))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        py: Python<'_>,
        family: &str,
        deltas: Vec<f64>,
        train_end: usize,
        sentiments: Option<Vec<f64>>,
        hyperparameters: Option<&Bound<'_, PyDict>>,
        uses_sentiment: bool,
        lookback: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let family: RegressorFamily = family.parse().map_err(value_err)?;
        let spec = RegressorSpec::new(family, hyperparams(hyperparameters)?, uses_sentiment).map_err(model_err)?;
        let s = series(deltas, sentiments)?;
        let inner = py
            .allow_threads(|| FittedRegressor::fit(&spec, &s, lookback, lookback..train_end, seed))
            .map_err(model_err)?;
        Ok(PyRegressor { inner })
    }

    /// Predictions for delta indices `targets`; each reads only earlier rows.
    #[pyo3(signature = (deltas, targets, sentiments = None))]
    fn predict(&self, deltas: Vec<f64>, targets: Vec<usize>, sentiments: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
        self.inner
            .predict(&series(deltas, sentiments)?, &targets)
            .map_err(model_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&self.inner, &path).map_err(model_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyRegressor {
            inner: load_checkpoint(&path).map_err(model_err)?,
        })
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.spec.family.to_string()
    }

    #[getter]
    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }
}

/// Direction model fit on a delta series.
#[pyclass(name = "Classifier", module = "etfcast_py")]
struct PyClassifier {
    inner: FittedClassifier,
}

#[pymethods]
impl PyClassifier {
    #[staticmethod]
    #[pyo3(signature = (family, deltas, train_end, sentiments = None, hyperparameters = None, uses_sentiment = false, lookback = 5, seed = 42))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        py: Python<'_>,
        family: &str,
        deltas: Vec<f64>,
        train_end: usize,
        sentiments: Option<Vec<f64>>,
        hyperparameters: Option<&Bound<'_, PyDict>>,
        uses_sentiment: bool,
        lookback: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let family: ClassifierFamily = family.parse().map_err(value_err)?;
        let spec = ClassifierSpec::new(family, hyperparams(hyperparameters)?, uses_sentiment).map_err(model_err)?;
        let s = series(deltas, sentiments)?;
        let inner = py
            .allow_threads(|| FittedClassifier::fit(&spec, &s, lookback, lookback..train_end, seed))
            .map_err(model_err)?;
        Ok(PyClassifier { inner })
    }

    /// Labels (1 = up, 0 = down or flat) for delta indices `targets`.
    #[pyo3(signature = (deltas, targets, sentiments = None))]
    fn predict(&self, deltas: Vec<f64>, targets: Vec<usize>, sentiments: Option<Vec<f64>>) -> PyResult<Vec<u8>> {
        let preds = self
            .inner
            .predict(&series(deltas, sentiments)?, &targets)
            .map_err(model_err)?;
        Ok(preds.into_iter().map(|p| p.label).collect())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&self.inner, &path).map_err(model_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyClassifier {
            inner: load_checkpoint(&path).map_err(model_err)?,
        })
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.spec.family.to_string()
    }

    #[getter]
    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }
}

#[pyfunction]
fn mse(pred: Vec<f64>, actual: Vec<f64>) -> PyResult<f64> {
    evaluation::mse(&pred, &actual).map_err(value_err)
}

#[pyfunction]
fn mae(pred: Vec<f64>, actual: Vec<f64>) -> PyResult<f64> {
    evaluation::mae(&pred, &actual).map_err(value_err)
}

#[pyfunction]
fn accuracy(pred: Vec<u8>, actual: Vec<u8>) -> PyResult<f64> {
    evaluation::accuracy(&pred, &actual).map_err(value_err)
}

#[pyfunction]
fn f1_score(pred: Vec<u8>, actual: Vec<u8>) -> PyResult<f64> {
    evaluation::f1_score(&pred, &actual).map_err(value_err)
}

type Span = (usize, usize);

/// Expanding-window folds as `[((train_start, train_end), (test_start, test_end)), ...]`.
#[pyfunction]
fn walk_forward(n: usize, horizon: usize, min_train: usize) -> PyResult<Vec<(Span, Span)>> {
    let plan = make_walk_forward(n, horizon, min_train).map_err(value_err)?;
    Ok(plan
        .folds
        .iter()
        .map(|f| ((f.train.start, f.train.end), (f.test.start, f.test.end)))
        .collect())
}

#[pyfunction(name = "reconstruct_closes")]
fn py_reconstruct_closes(first_close: f64, deltas: Vec<f64>) -> Vec<f64> {
    reconstruct_closes(first_close, &deltas)
}

#[pyfunction(name = "coverage_pct")]
fn py_coverage_pct(n_sentiment: usize, n_price: usize) -> f64 {
    coverage_pct(n_sentiment, n_price)
}

/// Offline lexicon score of `text`: `(score, reason)`.
#[pyfunction]
fn score_text(text: &str) -> (i32, String) {
    MockLexiconClient::score_text(text)
}

/// Validate a raw scoring reply; returns `(score, reason)`.
#[pyfunction(name = "parse_score_response")]
fn py_parse_score_response(raw: &str) -> PyResult<(i32, String)> {
    parse_score_response(raw).map_err(PyValueError::new_err)
}

#[pymodule]
fn etfcast_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ConfigError", m.py().get_type_bound::<ConfigError>())?;
    m.add("PipelineError", m.py().get_type_bound::<PipelineError>())?;
    m.add("ModelError", m.py().get_type_bound::<ModelError>())?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyPipeline>()?;
    m.add_class::<PyRegressor>()?;
    m.add_class::<PyClassifier>()?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(f1_score, m)?)?;
    m.add_function(wrap_pyfunction!(walk_forward, m)?)?;
    m.add_function(wrap_pyfunction!(py_reconstruct_closes, m)?)?;
    m.add_function(wrap_pyfunction!(py_coverage_pct, m)?)?;
    m.add_function(wrap_pyfunction!(score_text, m)?)?;
    m.add_function(wrap_pyfunction!(py_parse_score_response, m)?)?;
    Ok(())
}
