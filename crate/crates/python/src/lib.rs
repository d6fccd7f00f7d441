//! Python bindings: datasets, models, attributions, perturbation sweeps,
//! similarity measures and the experiment runner.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use ::xai_harmony as core;
use ::xai_harmony::attribution::{self, Backend, MarginalOptions, RetrainOptions};
use ::xai_harmony::perturbation::{self, PerturbationGrid, SweepOptions};
use ::xai_harmony::runner;

create_exception!(xai_harmony, HarmonyError, PyException);

fn to_py(e: core::Error) -> PyErr {
    HarmonyError::new_err(e.to_string())
}

fn rows(x: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    x.outer_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<ndarray::Array2<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(HarmonyError::new_err("rows have different lengths"));
    }
    ndarray::Array2::from_shape_vec((n, m), rows.concat()).map_err(|e| HarmonyError::new_err(e.to_string()))
}

/// An encoded classification dataset.
#[pyclass(frozen, module = "xai_harmony")]
struct Dataset {
    inner: core::Dataset,
}

#[pymethods]
impl Dataset {
    /// Load a bundled (`iris`, `wine`, `breast_cancer`) or generated
    /// (`fraud`, `census`) dataset.
    #[staticmethod]
    #[pyo3(signature = (name, seed = 0))]
    fn named(name: &str, seed: u64) -> PyResult<Self> {
        let cfg = runner::ExperimentConfig::new(seed, &[name]);
        let (inner, _) = runner::resolve_dataset(&cfg.datasets[0], &cfg, 0).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Load a CSV described by a TOML schema.
    #[staticmethod]
    fn from_csv(csv: &str, schema: &str) -> PyResult<Self> {
        let schema = core::data::Schema::load(schema).map_err(to_py)?;
        Ok(Self {
            inner: core::data::load_csv(csv, &schema).map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.column_names()
    }

    #[getter]
    fn class_names(&self) -> Vec<String> {
        self.inner.class_names().to_vec()
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        rows(self.inner.x())
    }

    #[getter]
    fn y(&self) -> Vec<usize> {
        self.inner.y().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    /// Shuffled train/test partition.
    #[pyo3(signature = (test_fraction = 0.2, seed = 0))]
    fn split(&self, test_fraction: f64, seed: u64) -> PyResult<(Dataset, Dataset)> {
        let s = core::data::split(&self.inner, test_fraction, seed).map_err(to_py)?;
        Ok((Dataset { inner: s.train }, Dataset { inner: s.test }))
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(name={:?}, rows={}, columns={}, classes={})",
            self.inner.name(),
            self.inner.n_rows(),
            self.inner.n_columns(),
            self.inner.class_count()
        )
    }
}

/// A fitted classifier.
#[pyclass(frozen, module = "xai_harmony")]
struct Model {
    inner: core::TrainedModel,
}

#[pymethods]
impl Model {
    /// Fit `kind` (`logit`, `knn`, `rf`, `gbc`, `mlp`) on every column.
    #[staticmethod]
    #[pyo3(signature = (kind, data, seed = 0))]
    fn train(py: Python<'_>, kind: &str, data: &Dataset, seed: u64) -> PyResult<Self> {
        let kind: core::ModelKind = kind.parse().map_err(to_py)?;
        let inner = py
            .detach(|| core::models::train_full(&kind, &data.inner, seed))
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    fn predict_proba(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.predict_proba(&matrix(x)?).map_err(to_py)?))
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        self.inner.predict_labels(&matrix(x)?).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }
}

/// Per-row Shapley attributions.
#[pyclass(frozen, module = "xai_harmony")]
struct Attribution {
    inner: attribution::AttributionMatrix,
}

#[pymethods]
impl Attribution {
    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.values)
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names.clone()
    }

    #[getter]
    fn baseline(&self) -> Vec<f64> {
        self.inner.baseline.clone()
    }

    #[getter]
    fn prediction(&self) -> Vec<f64> {
        self.inner.prediction.clone()
    }

    #[getter]
    fn backend(&self) -> String {
        self.inner.backend.to_string()
    }

    /// Normalized column sums of absolute attributions.
    fn rfi(&self) -> PyResult<Vec<f64>> {
        Ok(attribution::static_rfi(&self.inner).map_err(to_py)?.values().to_vec())
    }

    fn to_csv(&self) -> PyResult<String> {
        self.inner.to_csv_string().map_err(to_py)
    }
}

/// Shapley attributions of `kind` for every row of `test`. `backend` is
/// `auto`, `retrain` or `marginal`.
#[pyfunction]
#[pyo3(signature = (kind, train, test, seed = 0, backend = "auto", sample_budget = 200, background_k = 10))]
fn shapley(
    py: Python<'_>,
    kind: &str,
    train: &Dataset,
    test: &Dataset,
    seed: u64,
    backend: &str,
    sample_budget: usize,
    background_k: usize,
) -> PyResult<Attribution> {
    let kind: core::ModelKind = kind.parse().map_err(to_py)?;
    let choice: runner::BackendChoice = backend.parse().map_err(to_py)?;
    let m = train.inner.n_columns();
    let split = core::DataSplit {
        train: train.inner.clone(),
        test: test.inner.clone(),
        train_indices: Vec::new(),
        test_indices: Vec::new(),
        seed,
        test_fraction: 0.0,
    };
    let inner = py
        .detach(|| match choice.resolve(m, attribution::DEFAULT_EXACT_CAP) {
            Backend::RetrainExact => attribution::shapley_retrain_with(
                &kind,
                &split,
                &RetrainOptions {
                    seed,
                    max_features: m.max(attribution::DEFAULT_EXACT_CAP),
                    ..RetrainOptions::default()
                },
            ),
            Backend::MarginalSampling => {
                let model = core::models::train_full(&kind, &split.train, seed)?;
                let background = attribution::summarize_background(&split.train, background_k, seed)?;
                let opts = MarginalOptions {
                    sample_budget,
                    seed,
                    model_name: kind.name().to_string(),
                    ..MarginalOptions::default()
                };
                attribution::shapley_marginal_with(&model, &split.test, &background, &opts)
            }
        })
        .map_err(to_py)?;
    Ok(Attribution { inner })
}

/// Scores of a fixed model on perturbed copies of a test set.
#[pyclass(frozen, module = "xai_harmony")]
struct Sweep {
    inner: perturbation::SweepResult,
}

#[pymethods]
impl Sweep {
    #[getter]
    fn scores(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.scores)
    }

    #[getter]
    fn base_score(&self) -> f64 {
        self.inner.base_score
    }

    #[getter]
    fn anwa(&self) -> Vec<f64> {
        self.inner.anwa.clone()
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.inner.grid.points().to_vec()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names.clone()
    }

    /// Normalized deviations of the weighted averages from the base score.
    fn rfi(&self) -> PyResult<Vec<f64>> {
        Ok(perturbation::dynamic_rfi(&self.inner).map_err(to_py)?.values().to_vec())
    }

    fn to_csv(&self) -> PyResult<String> {
        self.inner.to_csv_string().map_err(to_py)
    }
}

#[pyfunction]
#[pyo3(signature = (model, test, metric = "accuracy", grid = "0.1:1.9:0.1", seed = 0))]
fn sweep(py: Python<'_>, model: &Model, test: &Dataset, metric: &str, grid: &str, seed: u64) -> PyResult<Sweep> {
    let metric: core::MetricKind = metric.parse().map_err(to_py)?;
    let grid: PerturbationGrid = grid.parse().map_err(to_py)?;
    let mut opts = SweepOptions::new(metric, seed);
    opts.model_name = model.inner.kind().name().to_string();
    let inner = py
        .detach(|| perturbation::sweep_with(&model.inner, &test.inner, &grid, &opts))
        .map_err(to_py)?;
    Ok(Sweep { inner })
}

/// Weighted average of `scores` with weights `1 - |1 - p|`.
#[pyfunction]
fn anwa(points: Vec<f64>, scores: Vec<f64>) -> PyResult<f64> {
    if points.len() != scores.len() {
        return Err(HarmonyError::new_err("points and scores differ in length"));
    }
    let grid = PerturbationGrid::new(points).map_err(to_py)?;
    Ok(perturbation::anwa(grid.weights(), &scores))
}

#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    core::comparison::cosine_slices(&a, &b).map_err(to_py)
}

fn rfi_vector(values: Vec<f64>, names: Vec<String>) -> PyResult<core::RfiVector> {
    core::RfiVector::from_magnitudes(
        values,
        names,
        core::RfiSource::StaticShap,
        core::Provenance::new("", "", "", 0),
    )
    .map_err(to_py)
}

/// The `k` features with the largest values, ties by ascending name.
#[pyfunction]
fn top_k(values: Vec<f64>, names: Vec<String>, k: usize) -> PyResult<Vec<String>> {
    let v = rfi_vector(values, names)?;
    Ok(core::comparison::top_k(&v, k).map_err(to_py)?.members.into_iter().collect())
}

#[pyfunction]
fn jaccard(a: Vec<String>, b: Vec<String>) -> f64 {
    let set = |v: Vec<String>| core::TopKSet {
        k: v.len(),
        members: v.into_iter().collect(),
    };
    core::comparison::jaccard(&set(a), &set(b))
}

/// Jaccard index of the top-k sets for k = 1..m.
#[pyfunction]
fn jaccard_curve(a: Vec<f64>, b: Vec<f64>, names: Vec<String>) -> PyResult<Vec<f64>> {
    let (va, vb) = (rfi_vector(a, names.clone())?, rfi_vector(b, names)?);
    core::comparison::jaccard_curve(&va, &vb).map_err(to_py)
}

/// Run an experiment from TOML text. Writes reports to `out` when given
/// and returns the rendered report files keyed by name.
#[pyfunction]
#[pyo3(signature = (config, out = None))]
fn run(py: Python<'_>, config: &str, out: Option<&str>) -> PyResult<BTreeMap<String, String>> {
    let cfg = runner::ExperimentConfig::from_toml_str(config).map_err(to_py)?;
    let table = py
        .detach(|| {
            if cfg.sample_sizes.is_empty() {
                runner::run_matrix(&cfg)
            } else {
                runner::run_sample_size(&cfg, &cfg.sample_sizes)
            }
        })
        .map_err(to_py)?;
    let rendered = match out {
        Some(dir) => runner::emit_reports(&table, dir),
        None => runner::render_reports(&table),
    }
    .map_err(to_py)?;
    Ok(rendered.files.into_iter().collect())
}

#[pymodule]
#[pyo3(name = "xai_harmony")]
fn harmony_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HarmonyError", m.py().get_type::<HarmonyError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_class::<Attribution>()?;
    m.add_class::<Sweep>()?;
    m.add_function(wrap_pyfunction!(shapley, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(anwa, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(top_k, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard_curve, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
