use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{resolve_dataset, DatasetInfo, ExperimentConfig};
use crate::attribution::{
    shapley_marginal_with, shapley_retrain_with, static_rfi, summarize_background, AttributionMatrix, Backend,
    Deadline, MarginalOptions, RetrainOptions,
};
use crate::comparison::harmony;
use crate::data::{split, subsample, Dataset};
use crate::error::{Error, Result};
use crate::metrics::MetricKind;
use crate::models::{train_full, ModelKind};
use crate::perturbation::{dynamic_rfi, sweep_with, PerturbationGrid, SweepOptions};
use crate::seed;

/// One (seed, dataset, model, metric) comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub seed: u64,
    pub dataset: String,
    pub model: String,
    pub metric: String,
    pub sample_size: Option<usize>,
    pub backend: Backend,
    pub n_train: usize,
    pub n_test: usize,
    pub feature_names: Vec<String>,
    pub base_score: f64,
    pub cosine: f64,
    /// Present when the dataset has at least `jaccard_min_features` columns.
    pub jaccard_curve: Option<Vec<f64>>,
    pub static_rfi: Vec<f64>,
    pub dynamic_rfi: Vec<f64>,
    pub static_degenerate: bool,
    pub dynamic_degenerate: bool,
    pub warning: Option<String>,
    pub noop_cells: usize,
    /// Largest per-row violation of `Σφ = prediction − baseline`.
    pub efficiency_gap: f64,
}

impl CellResult {
    /// Mean Jaccard over `k = 1..=min(10, m)`.
    pub fn jaccard_mean(&self) -> Option<f64> {
        self.jaccard_curve.as_ref().map(|c| {
            let k = c.len().min(10);
            c[..k].iter().sum::<f64>() / k as f64
        })
    }
}

/// A cell that did not produce a result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub seed: u64,
    pub dataset: String,
    pub model: String,
    pub metric: String,
    pub sample_size: Option<usize>,
    pub reason: String,
}

/// Mean and sample standard deviation of the cosine over a group of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    /// `all`, `dataset`, `model`, `metric` or `dataset/model`.
    pub grouping: String,
    pub key: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub config: ExperimentConfig,
    pub datasets: Vec<DatasetInfo>,
    pub cells: Vec<CellResult>,
    pub skips: Vec<Skip>,
    pub summary: Vec<GroupSummary>,
    /// Sizes of a sample-size sweep, empty for a matrix run.
    pub sample_sizes: Vec<usize>,
}

impl ResultTable {
    pub fn expected_cells(&self) -> usize {
        let per_size = self.sample_sizes.len().max(1);
        self.config.seeds * self.config.datasets.len() * self.config.models.len() * self.config.metrics.len() * per_size
    }

    pub fn has_skips(&self) -> bool {
        !self.skips.is_empty()
    }
}

fn skip_reason(e: &Error) -> String {
    match e {
        Error::Budget(_) => "budget".into(),
        other => other.to_string(),
    }
}

/// Everything that one (seed, dataset, model) unit needs.
struct Unit<'a> {
    seed: u64,
    data: &'a Dataset,
    sample_size: Option<usize>,
    kind: &'a ModelKind,
}

struct Plan {
    metrics: Vec<MetricKind>,
    grid: PerturbationGrid,
}

/// Split, attribute, train, sweep each metric, compare. Returns one entry
/// per metric.
fn run_unit(unit: &Unit, cfg: &ExperimentConfig, plan: &Plan) -> Vec<std::result::Result<CellResult, Skip>> {
    let skip = |metric: &MetricKind, e: &Error| Skip {
        seed: unit.seed,
        dataset: unit.data.name().to_string(),
        model: unit.kind.name().to_string(),
        metric: metric.label(),
        sample_size: unit.sample_size,
        reason: skip_reason(e),
    };
    let deadline = Deadline::after(cfg.cell_budget());
    let prepared = prepare_unit(unit, cfg, &deadline);
    let (split, model, attr, model_seed) = match prepared {
        Ok(p) => p,
        Err(e) => return plan.metrics.iter().map(|m| Err(skip(m, &e))).collect(),
    };
    plan.metrics
        .iter()
        .map(|&metric| {
            let opts = SweepOptions {
                metric,
                seed: model_seed,
                categorical_mode: cfg.categorical_mode,
                model_name: unit.kind.name().to_string(),
                deadline: Some(deadline.clone()),
            };
            let cell = (|| {
                let sweep = sweep_with(&model, &split.test, &plan.grid, &opts)?;
                let s = static_rfi(&attr)?;
                let d = dynamic_rfi(&sweep)?;
                let report = harmony(&s, &d)?;
                Ok(CellResult {
                    seed: unit.seed,
                    dataset: unit.data.name().to_string(),
                    model: unit.kind.name().to_string(),
                    metric: metric.label(),
                    sample_size: unit.sample_size,
                    backend: attr.backend,
                    n_train: split.train.n_rows(),
                    n_test: split.test.n_rows(),
                    feature_names: report.feature_names.clone(),
                    base_score: sweep.base_score,
                    cosine: report.cosine,
                    jaccard_curve: (s.len() >= cfg.jaccard_min_features).then(|| report.jaccard_curve.clone()),
                    static_rfi: s.values().to_vec(),
                    dynamic_rfi: d.values().to_vec(),
                    static_degenerate: report.static_degenerate,
                    dynamic_degenerate: report.dynamic_degenerate,
                    warning: report.warning,
                    noop_cells: sweep.noop_cells,
                    efficiency_gap: attr.efficiency_gap(),
                })
            })();
            cell.map_err(|e: Error| skip(&metric, &e))
        })
        .collect()
}

type Prepared = (crate::data::DataSplit, crate::models::TrainedModel, AttributionMatrix, u64);

fn prepare_unit(unit: &Unit, cfg: &ExperimentConfig, deadline: &Deadline) -> Result<Prepared> {
    let data_seed = seed::derive(unit.seed, &[seed::tag(unit.data.name())]);
    let split = split(unit.data, cfg.test_fraction, data_seed)?;
    let model_seed = seed::derive(data_seed, &[seed::tag(unit.kind.name())]);
    let m = split.train.n_columns();
    let backend = cfg.backend.resolve(m, cfg.exact_cap);
    let (attr, model) = match backend {
        Backend::RetrainExact => {
            let opts = RetrainOptions {
                seed: model_seed,
                policy: cfg.class_policy,
                max_features: cfg.exact_cap.max(m),
                deadline: Some(deadline.clone()),
            };
            let attr = shapley_retrain_with(unit.kind, &split, &opts)?;
            (attr, train_full(unit.kind, &split.train, model_seed)?)
        }
        Backend::MarginalSampling => {
            let model = train_full(unit.kind, &split.train, model_seed)?;
            let bg_seed = seed::derive(model_seed, &[seed::tag("background")]);
            let background = summarize_background(&split.train, cfg.background_k, bg_seed)?;
            let explain = split.with_test_limit(cfg.max_explain_rows).test;
            let opts = MarginalOptions {
                sample_budget: cfg.sample_budget,
                seed: model_seed,
                policy: cfg.class_policy,
                model_name: unit.kind.name().to_string(),
                deadline: Some(deadline.clone()),
            };
            (shapley_marginal_with(&model, &explain, &background, &opts)?, model)
        }
    };
    Ok((split, model, attr, model_seed))
}

fn plan(cfg: &ExperimentConfig) -> Result<(Vec<ModelKind>, Plan)> {
    cfg.validate()?;
    Ok((
        cfg.model_kinds()?,
        Plan {
            metrics: cfg.metric_kinds()?,
            grid: cfg.perturbation_grid()?,
        },
    ))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Execute units on the worker pool and collect results in unit order.
fn execute(units: &[Unit], cfg: &ExperimentConfig, plan: &Plan) -> Result<(Vec<CellResult>, Vec<Skip>)> {
    let outcomes: Vec<_> = pool(cfg.jobs)?.install(|| units.par_iter().map(|u| run_unit(u, cfg, plan)).collect());
    let mut cells = Vec::new();
    let mut skips = Vec::new();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            Ok(c) => cells.push(c),
            Err(s) => skips.push(s),
        }
    }
    Ok((cells, skips))
}

/// Skip every cell of a dataset that failed to load.
fn dataset_skips(cfg: &ExperimentConfig, plan: &Plan, kinds: &[ModelKind], name: &str, size: Option<usize>, e: &Error) -> Vec<Skip> {
    let mut out = Vec::new();
    for seed in cfg.replicate_seeds() {
        for kind in kinds {
            for metric in &plan.metrics {
                out.push(Skip {
                    seed,
                    dataset: name.to_string(),
                    model: kind.name().to_string(),
                    metric: metric.label(),
                    sample_size: size,
                    reason: skip_reason(e),
                });
            }
        }
    }
    out
}

/// Every (seed, dataset, model, metric) cell of the configuration.
pub fn run_matrix(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let (kinds, plan) = plan(cfg)?;
    let mut loaded = Vec::new();
    let mut infos = Vec::new();
    let mut load_skips = Vec::new();
    for src in &cfg.datasets {
        match resolve_dataset(src, cfg, 0) {
            Ok((ds, info)) => {
                loaded.push(ds);
                infos.push(info);
            }
            Err(e) => load_skips.extend(dataset_skips(cfg, &plan, &kinds, src.name(), None, &e)),
        }
    }
    let mut units = Vec::new();
    for seed in cfg.replicate_seeds() {
        for data in &loaded {
            for kind in &kinds {
                units.push(Unit {
                    seed,
                    data,
                    sample_size: None,
                    kind,
                });
            }
        }
    }
    let (cells, mut skips) = execute(&units, cfg, &plan)?;
    skips.extend(load_skips);
    Ok(finish(cfg.clone(), infos, cells, skips, Vec::new()))
}

/// Rerun the pipeline on subsamples of each configured dataset. Requires a
/// single model and metric.
pub fn run_sample_size(cfg: &ExperimentConfig, sizes: &[usize]) -> Result<ResultTable> {
    let (kinds, plan) = plan(cfg)?;
    if kinds.len() != 1 || plan.metrics.len() != 1 {
        return Err(Error::Config("a sample-size sweep needs exactly one model and one metric".into()));
    }
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::Config("sample sizes must be a non-empty list of positive sizes".into()));
    }
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let largest = *sizes.last().expect("non-empty");

    let mut infos = Vec::new();
    let mut samples: Vec<(usize, Dataset)> = Vec::new();
    let mut load_skips = Vec::new();
    for src in &cfg.datasets {
        let (ds, info) = match resolve_dataset(src, cfg, largest) {
            Ok(v) => v,
            Err(e) => {
                for &size in &sizes {
                    load_skips.extend(dataset_skips(cfg, &plan, &kinds, src.name(), Some(size), &e));
                }
                continue;
            }
        };
        for &size in &sizes {
            let sample_seed = seed::derive(cfg.seed, &[seed::tag("subsample"), size as u64]);
            match subsample(&ds, size, sample_seed) {
                Ok(s) => samples.push((size, s)),
                Err(e) => load_skips.extend(dataset_skips(cfg, &plan, &kinds, ds.name(), Some(size), &e)),
            }
        }
        infos.push(info);
    }
    let mut units = Vec::new();
    for seed in cfg.replicate_seeds() {
        for (size, data) in &samples {
            units.push(Unit {
                seed,
                data,
                sample_size: Some(*size),
                kind: &kinds[0],
            });
        }
    }
    let (cells, mut skips) = execute(&units, cfg, &plan)?;
    skips.extend(load_skips);
    let mut cfg = cfg.clone();
    cfg.sample_sizes = sizes.clone();
    Ok(finish(cfg, infos, cells, skips, sizes))
}

fn finish(
    config: ExperimentConfig,
    datasets: Vec<DatasetInfo>,
    cells: Vec<CellResult>,
    mut skips: Vec<Skip>,
    sample_sizes: Vec<usize>,
) -> ResultTable {
    skips.sort_by(|a, b| {
        (a.seed, &a.dataset, &a.model, &a.metric, a.sample_size).cmp(&(b.seed, &b.dataset, &b.model, &b.metric, b.sample_size))
    });
    let summary = summarize(&cells);
    ResultTable {
        config,
        datasets,
        cells,
        skips,
        summary,
        sample_sizes,
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Cosine mean and standard deviation over every cell and per dataset,
/// model, metric and dataset/model pair.
pub fn summarize(cells: &[CellResult]) -> Vec<GroupSummary> {
    let keys: [(&str, fn(&CellResult) -> String); 5] = [
        ("all", |_| "all".into()),
        ("dataset", |c| c.dataset.clone()),
        ("model", |c| c.model.clone()),
        ("metric", |c| c.metric.clone()),
        ("dataset/model", |c| format!("{}/{}", c.dataset, c.model)),
    ];
    let mut out = Vec::new();
    for (grouping, key) in keys {
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for c in cells {
            groups.entry(key(c)).or_default().push(c.cosine);
        }
        for (k, values) in groups {
            let (mean, std) = mean_std(&values);
            out.push(GroupSummary {
                grouping: grouping.into(),
                key: k,
                count: values.len(),
                mean,
                std,
            });
        }
    }
    out
}
