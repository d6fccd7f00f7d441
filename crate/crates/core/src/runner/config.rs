use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::attribution::{Backend, ClassPolicy, DEFAULT_BACKGROUND_K, DEFAULT_EXACT_CAP, DEFAULT_SAMPLE_BUDGET};
use crate::data::{bundled, load_csv, synth_census, synth_fraud, Dataset, Schema, BUNDLED_NAMES};
use crate::error::{Error, Result};
use crate::metrics::{Average, MetricKind};
use crate::models::ModelKind;
use crate::perturbation::{CategoricalMode, PerturbationGrid};
use crate::seed;

/// Built-in dataset names accepted in `datasets`.
pub const DATASET_NAMES: [&str; 5] = ["iris", "wine", "breast_cancer", "fraud", "census"];

/// A dataset reference: a built-in name or a CSV with its schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    Named(String),
    Csv { name: String, csv: PathBuf, schema: PathBuf },
}

impl DatasetSource {
    pub fn name(&self) -> &str {
        match self {
            DatasetSource::Named(n) => n,
            DatasetSource::Csv { name, .. } => name,
        }
    }
}

/// Attribution backend selection; `auto` picks exact retraining up to
/// `exact_cap` encoded columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    #[default]
    Auto,
    Retrain,
    Marginal,
}

impl BackendChoice {
    pub fn resolve(self, m: usize, cap: usize) -> Backend {
        match self {
            BackendChoice::Auto => Backend::auto(m, cap),
            BackendChoice::Retrain => Backend::RetrainExact,
            BackendChoice::Marginal => Backend::MarginalSampling,
        }
    }
}

impl std::str::FromStr for BackendChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(BackendChoice::Auto),
            other => Ok(match other.parse::<Backend>()? {
                Backend::RetrainExact => BackendChoice::Retrain,
                Backend::MarginalSampling => BackendChoice::Marginal,
            }),
        }
    }
}

fn d_seeds() -> usize {
    1
}
fn d_models() -> Vec<String> {
    ModelKind::NAMES.iter().map(|s| s.to_string()).collect()
}
fn d_metrics() -> Vec<String> {
    vec!["accuracy".into()]
}
fn d_grid() -> String {
    "0.1:1.9:0.1".into()
}
fn d_test_fraction() -> f64 {
    0.2
}
fn d_sample_budget() -> usize {
    DEFAULT_SAMPLE_BUDGET
}
fn d_background_k() -> usize {
    DEFAULT_BACKGROUND_K
}
fn d_max_explain_rows() -> usize {
    200
}
fn d_exact_cap() -> usize {
    DEFAULT_EXACT_CAP
}
fn d_out() -> PathBuf {
    PathBuf::from("results")
}
fn d_cell_budget_secs() -> u64 {
    600
}
fn d_jaccard_min_features() -> usize {
    5
}
fn d_fraud_rows() -> usize {
    3430
}
fn d_fraud_fraction() -> f64 {
    0.5
}
fn d_census_rows() -> usize {
    4000
}

/// Experiment definition. Loaded from TOML; command-line flags override
/// individual keys. `seed` has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Replicates; replicate `r` uses seed `seed + r`.
    #[serde(default = "d_seeds")]
    pub seeds: usize,
    pub datasets: Vec<DatasetSource>,
    #[serde(default = "d_models")]
    pub models: Vec<String>,
    /// Metric labels such as `accuracy`, `f1` or `f1-macro`.
    #[serde(default = "d_metrics")]
    pub metrics: Vec<String>,
    /// Averaging for metric labels without an explicit suffix.
    #[serde(default)]
    pub average: Average,
    #[serde(default = "d_grid")]
    pub grid: String,
    #[serde(default = "d_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub backend: BackendChoice,
    #[serde(default = "d_sample_budget")]
    pub sample_budget: usize,
    #[serde(default = "d_background_k")]
    pub background_k: usize,
    /// Test rows explained by the sampling backend.
    #[serde(default = "d_max_explain_rows")]
    pub max_explain_rows: usize,
    #[serde(default = "d_exact_cap")]
    pub exact_cap: usize,
    /// Worker threads; 0 uses every core. Does not affect results.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default = "d_out")]
    pub out: PathBuf,
    #[serde(default = "d_cell_budget_secs")]
    pub cell_budget_secs: u64,
    /// Jaccard curves are omitted for datasets with fewer encoded columns.
    #[serde(default = "d_jaccard_min_features")]
    pub jaccard_min_features: usize,
    #[serde(default)]
    pub class_policy: ClassPolicy,
    #[serde(default)]
    pub categorical_mode: CategoricalMode,
    #[serde(default)]
    pub sample_sizes: Vec<usize>,
    #[serde(default = "d_fraud_rows")]
    pub fraud_rows: usize,
    #[serde(default = "d_fraud_fraction")]
    pub fraud_fraction: f64,
    /// Rows of the generated census-like data.
    #[serde(default = "d_census_rows")]
    pub census_rows: usize,
    /// Prepared census CSV (see `datasets fetch`); its schema sits next to
    /// it as `<stem>.schema.toml`. Generated census-like data is used when
    /// unset or missing.
    #[serde(default)]
    pub census_csv: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for every optional key.
    pub fn new(seed: u64, datasets: &[&str]) -> Self {
        let mut table = toml::Table::new();
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
        table.insert(
            "datasets".into(),
            toml::Value::Array(datasets.iter().map(|d| toml::Value::String(d.to_string())).collect()),
        );
        Self::from_table(table).expect("defaults are valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_table(table)
    }

    /// Deserialize a key table, e.g. a config file with flag overrides
    /// already merged in.
    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.datasets.is_empty() {
            return bad("no datasets selected".into());
        }
        for d in &self.datasets {
            if let DatasetSource::Named(n) = d {
                if !DATASET_NAMES.contains(&n.as_str()) {
                    return bad(format!("unknown dataset '{n}' (known: {})", DATASET_NAMES.join(", ")));
                }
            }
        }
        if self.models.is_empty() || self.metrics.is_empty() {
            return bad("models and metrics must be non-empty".into());
        }
        let as_config = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        self.model_kinds()?;
        self.metric_kinds()?;
        self.perturbation_grid().map_err(as_config)?;
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} outside (0, 1)", self.test_fraction));
        }
        if self.seeds == 0 || self.sample_budget == 0 || self.background_k == 0 || self.max_explain_rows == 0 {
            return bad("seeds, sample_budget, background_k and max_explain_rows must be positive".into());
        }
        if self.cell_budget_secs == 0 {
            return bad("cell_budget_secs must be positive".into());
        }
        if !(self.fraud_fraction > 0.0 && self.fraud_fraction < 1.0) {
            return bad(format!("fraud_fraction {} outside (0, 1)", self.fraud_fraction));
        }
        if self.sample_sizes.contains(&0) {
            return bad("sample sizes must be positive".into());
        }
        Ok(())
    }

    pub fn model_kinds(&self) -> Result<Vec<ModelKind>> {
        self.models.iter().map(|m| m.parse()).collect()
    }

    pub fn metric_kinds(&self) -> Result<Vec<MetricKind>> {
        self.metrics
            .iter()
            .map(|m| {
                if m.contains('-') {
                    m.parse()
                } else {
                    Ok(MetricKind::new(m.parse()?, self.average))
                }
            })
            .collect()
    }

    pub fn perturbation_grid(&self) -> Result<PerturbationGrid> {
        self.grid.parse()
    }

    pub fn replicate_seeds(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|r| self.seed.wrapping_add(r)).collect()
    }

    pub fn cell_budget(&self) -> Duration {
        Duration::from_secs(self.cell_budget_secs)
    }

    /// Prepared census files, when configured and present.
    pub fn census_files(&self) -> Option<(PathBuf, PathBuf)> {
        let csv = self.census_csv.as_ref()?;
        let schema = csv.with_extension("schema.toml");
        (csv.is_file() && schema.is_file()).then(|| (csv.clone(), schema))
    }
}

/// Where a resolved dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub origin: String,
    pub rows: usize,
    pub raw_features: usize,
    pub columns: usize,
    pub classes: Vec<String>,
}

impl DatasetInfo {
    pub fn of(ds: &Dataset, origin: impl Into<String>) -> Self {
        Self {
            name: ds.name().to_string(),
            origin: origin.into(),
            rows: ds.n_rows(),
            raw_features: ds.features().len(),
            columns: ds.n_columns(),
            classes: ds.class_names().to_vec(),
        }
    }
}

/// Load or generate a dataset. `min_rows` raises the size of generated
/// census-like data.
pub fn resolve_dataset(src: &DatasetSource, cfg: &ExperimentConfig, min_rows: usize) -> Result<(Dataset, DatasetInfo)> {
    let (ds, origin) = match src {
        DatasetSource::Csv { csv, schema, name } => {
            let mut schema = Schema::load(schema)?;
            schema.name = Some(name.clone());
            (load_csv(csv, &schema)?, format!("csv:{}", csv.display()))
        }
        DatasetSource::Named(n) if BUNDLED_NAMES.contains(&n.as_str()) => (bundled(n)?, "bundled".to_string()),
        DatasetSource::Named(n) if n == "fraud" => {
            let seed = seed::derive(cfg.seed, &[seed::tag("fraud")]);
            let ds = synth_fraud(cfg.fraud_rows, cfg.fraud_fraction, seed)?;
            (ds, format!("generated fraud (rows {}, fraud fraction {})", cfg.fraud_rows, cfg.fraud_fraction))
        }
        DatasetSource::Named(n) if n == "census" => match cfg.census_files() {
            Some((csv, schema)) => {
                let mut schema = Schema::load(schema)?;
                schema.name = Some("census".into());
                (load_csv(&csv, &schema)?, format!("census:{}", csv.display()))
            }
            None => {
                let rows = cfg.census_rows.max(min_rows);
                let seed = seed::derive(cfg.seed, &[seed::tag("census")]);
                let ds = synth_census(rows, seed)?;
                (ds, format!("generated census-like (rows {rows}); real census file absent"))
            }
        },
        DatasetSource::Named(n) => return Err(Error::Config(format!("unknown dataset '{n}'"))),
    };
    let info = DatasetInfo::of(&ds, origin);
    Ok((ds, info))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml_str("seed = 3\ndatasets = [\"iris\"]").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.models.len(), 5);
        assert_eq!(cfg.perturbation_grid().unwrap(), PerturbationGrid::default());
        assert_eq!(cfg.backend, BackendChoice::Auto);
        assert_eq!(cfg.test_fraction, 0.2);
        assert_eq!(cfg, ExperimentConfig::new(3, &["iris"]));
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(matches!(ExperimentConfig::from_toml_str("datasets = [\"iris\"]"), Err(Error::Config(_))));
    }

    #[test]
    fn names_are_validated() {
        for bad in [
            "seed = 0\ndatasets = [\"mnist\"]",
            "seed = 0\ndatasets = [\"iris\"]\nmodels = [\"svm\"]",
            "seed = 0\ndatasets = [\"iris\"]\nmetrics = [\"auc\"]",
            "seed = 0\ndatasets = [\"iris\"]\ngrid = \"0:2:0.5\"",
            "seed = 0\ndatasets = [\"iris\"]\ntest_fraction = 1.0",
            "seed = 0\ndatasets = [\"iris\"]\nunknown_key = 1",
        ] {
            assert!(matches!(ExperimentConfig::from_toml_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn csv_dataset_entries_and_metric_averaging() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
seed = 1
datasets = ["iris", { name = "mine", csv = "a.csv", schema = "a.schema.toml" }]
metrics = ["f1", "recall-micro"]
average = "macro"
"#,
        )
        .unwrap();
        assert_eq!(cfg.datasets[1].name(), "mine");
        let labels: Vec<String> = cfg.metric_kinds().unwrap().iter().map(|m| m.label()).collect();
        assert_eq!(labels, vec!["f1-macro", "recall-micro"]);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ExperimentConfig::new(9, &["wine", "census"]);
        assert_eq!(ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn census_falls_back_to_generated_data() {
        let cfg = ExperimentConfig::new(0, &["census"]);
        let (ds, info) = resolve_dataset(&cfg.datasets[0], &cfg, 5000).unwrap();
        assert_eq!(ds.n_rows(), 5000);
        assert!(info.origin.starts_with("generated census-like"));
    }
}
