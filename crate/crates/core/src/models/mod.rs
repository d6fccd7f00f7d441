//! The classifier suite: multinomial logistic regression, k-nearest
//! neighbours, random forest, gradient-boosted trees and a one-hidden-layer
//! perceptron, each trainable on a subset of the encoded columns.
//!
//! A model trained with an all-false feature mask is the *prior* model: it
//! predicts the empirical class distribution of its training data for every
//! input.

mod boost;
mod forest;
mod knn;
mod logit;
mod mlp;
mod standardize;
mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub use boost::BoostConfig;
pub use forest::ForestConfig;
pub use knn::KnnConfig;
pub use logit::LogitConfig;
pub use mlp::MlpConfig;

/// Anything that maps a full-width feature row to class probabilities.
pub trait ProbabilisticClassifier: Send + Sync {
    fn class_count(&self) -> usize;

    /// Width of the rows accepted by [`Self::predict_proba_into`].
    fn n_features(&self) -> usize;

    /// Write the class probabilities for `row` into `out` (length
    /// `class_count`).
    fn predict_proba_into(&self, row: &[f64], out: &mut [f64]);

    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.class_count()];
        self.predict_proba_into(row, &mut out);
        out
    }
}

/// Index of the largest entry, ties resolved toward the lower index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = c;
        }
    }
    best
}

fn check_width<M: ProbabilisticClassifier + ?Sized>(model: &M, x: &Array2<f64>) -> Result<()> {
    if x.ncols() != model.n_features() {
        return Err(Error::Shape {
            expected: format!("{} columns", model.n_features()),
            got: x.ncols().to_string(),
        });
    }
    Ok(())
}

/// `n × C` probability matrix.
pub fn predict_proba<M: ProbabilisticClassifier + ?Sized>(model: &M, x: &Array2<f64>) -> Result<Array2<f64>> {
    check_width(model, x)?;
    let mut out = Array2::zeros((x.nrows(), model.class_count()));
    let mut buf = vec![0.0; x.ncols()];
    for (row, mut dst) in x.outer_iter().zip(out.outer_iter_mut()) {
        let row = match row.as_slice() {
            Some(s) => s,
            None => {
                buf.iter_mut().zip(row.iter()).for_each(|(b, &v)| *b = v);
                &buf
            }
        };
        model.predict_proba_into(row, dst.as_slice_mut().expect("fresh array is contiguous"));
    }
    Ok(out)
}

/// Arg-max labels, ties toward the lower class index.
pub fn predict_labels<M: ProbabilisticClassifier + ?Sized>(model: &M, x: &Array2<f64>) -> Result<Vec<usize>> {
    let p = predict_proba(model, x)?;
    Ok(p.outer_iter()
        .map(|r| argmax(r.as_slice().expect("contiguous")))
        .collect())
}

/// Model family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelKind {
    Logit(LogitConfig),
    Knn(KnnConfig),
    RandomForest(ForestConfig),
    GradBoost(BoostConfig),
    Mlp(MlpConfig),
}

impl ModelKind {
    pub const NAMES: [&'static str; 5] = ["logit", "knn", "rf", "gbc", "mlp"];

    /// Every family with default hyperparameters.
    pub fn all() -> Vec<ModelKind> {
        Self::NAMES.iter().map(|n| n.parse().expect("known name")).collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Logit(_) => "logit",
            ModelKind::Knn(_) => "knn",
            ModelKind::RandomForest(_) => "rf",
            ModelKind::GradBoost(_) => "gbc",
            ModelKind::Mlp(_) => "mlp",
        }
    }

    /// True when training does not consume randomness, so that subset
    /// models differ only through their masks.
    pub fn is_deterministic_in_mask(&self) -> bool {
        matches!(self, ModelKind::Logit(_) | ModelKind::Knn(_) | ModelKind::GradBoost(_))
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logit" | "logistic" => Ok(ModelKind::Logit(LogitConfig::default())),
            "knn" => Ok(ModelKind::Knn(KnnConfig::default())),
            "rf" | "random_forest" | "randomforest" => Ok(ModelKind::RandomForest(ForestConfig::default())),
            "gbc" | "gradboost" | "grad_boost" => Ok(ModelKind::GradBoost(BoostConfig::default())),
            "mlp" | "nn" => Ok(ModelKind::Mlp(MlpConfig::default())),
            "svm" => Err(Error::Config("svm is not part of the model suite".into())),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

/// Training diagnostics. Non-convergence is reported, never fatal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_loss: Option<f64>,
}

impl TrainReport {
    fn closed_form() -> Self {
        Self {
            converged: true,
            iterations: 0,
            final_loss: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Params {
    Prior(Vec<f64>),
    Logit(logit::LogitModel),
    Knn(knn::KnnModel),
    Forest(forest::ForestModel),
    Boost(boost::BoostModel),
    Mlp(mlp::MlpModel),
}

/// A fitted classifier over a (possibly masked) encoded feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    kind: ModelKind,
    feature_mask: Vec<bool>,
    class_count: usize,
    train_seed: u64,
    params: Params,
    report: TrainReport,
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: TrainedModel,
}

/// Fit `kind` on the columns of `train` selected by `feature_mask`.
pub fn train(kind: &ModelKind, train: &Dataset, feature_mask: &[bool], seed: u64) -> Result<TrainedModel> {
    let m = train.n_columns();
    if feature_mask.len() != m {
        return Err(Error::Shape {
            expected: format!("feature mask of length {m}"),
            got: feature_mask.len().to_string(),
        });
    }
    if train.n_rows() == 0 {
        return Err(Error::Validation("cannot train on an empty dataset".into()));
    }
    let counts = train.class_counts();
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::Validation("training data must contain at least 2 classes".into()));
    }

    let active: Vec<usize> = (0..m).filter(|&j| feature_mask[j]).collect();
    let class_count = train.class_count();
    let x = train.x();
    let y = train.y();
    let (params, report) = if active.is_empty() {
        let n = y.len() as f64;
        (
            Params::Prior(counts.iter().map(|&c| c as f64 / n).collect()),
            TrainReport::closed_form(),
        )
    } else {
        match kind {
            ModelKind::Logit(cfg) => {
                let (model, report) = logit::fit(cfg, x, y, class_count, &active);
                (Params::Logit(model), report)
            }
            ModelKind::Knn(cfg) => (
                Params::Knn(knn::fit(cfg, x, y, class_count, &active)),
                TrainReport::closed_form(),
            ),
            ModelKind::RandomForest(cfg) => (
                Params::Forest(forest::fit(cfg, x, y, class_count, &active, seed)),
                TrainReport::closed_form(),
            ),
            ModelKind::GradBoost(cfg) => {
                let (model, report) = boost::fit(cfg, x, y, class_count, &active);
                (Params::Boost(model), report)
            }
            ModelKind::Mlp(cfg) => {
                let (model, report) = mlp::fit(cfg, x, y, class_count, &active, seed);
                (Params::Mlp(model), report)
            }
        }
    };

    Ok(TrainedModel {
        kind: kind.clone(),
        feature_mask: feature_mask.to_vec(),
        class_count,
        train_seed: seed,
        params,
        report,
    })
}

/// Fit on every column.
pub fn train_full(kind: &ModelKind, train_data: &Dataset, seed: u64) -> Result<TrainedModel> {
    train(kind, train_data, &vec![true; train_data.n_columns()], seed)
}

impl TrainedModel {
    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn feature_mask(&self) -> &[bool] {
        &self.feature_mask
    }

    pub fn train_seed(&self) -> u64 {
        self.train_seed
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    pub fn is_prior(&self) -> bool {
        matches!(self.params, Params::Prior(_))
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        predict_proba(self, x)
    }

    pub fn predict_labels(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        predict_labels(self, x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl ProbabilisticClassifier for TrainedModel {
    fn class_count(&self) -> usize {
        self.class_count
    }

    fn n_features(&self) -> usize {
        self.feature_mask.len()
    }

    fn predict_proba_into(&self, row: &[f64], out: &mut [f64]) {
        match &self.params {
            Params::Prior(p) => out.copy_from_slice(p),
            Params::Logit(m) => m.predict_into(row, out),
            Params::Knn(m) => m.predict_into(row, out),
            Params::Forest(m) => m.predict_into(row, out),
            Params::Boost(m) => m.predict_into(row, out),
            Params::Mlp(m) => m.predict_into(row, out),
        }
    }
}

/// In-place softmax.
pub(crate) fn softmax(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{iris, split, Dataset, RawColumn};
    use rand::Rng;

    fn two_class(n0: usize, n1: usize) -> Dataset {
        let n = n0 + n1;
        let labels: Vec<String> = (0..n).map(|i| if i < n0 { "a" } else { "b" }.to_string()).collect();
        Dataset::from_raw(
            "t",
            vec![
                RawColumn::continuous("u", (0..n).map(|i| i as f64).collect()),
                RawColumn::continuous("v", (0..n).map(|i| (i * 7 % 5) as f64).collect()),
            ],
            &labels,
        )
        .unwrap()
    }

    #[test]
    fn all_false_mask_gives_the_prior() {
        let ds = two_class(6, 4);
        for kind in ModelKind::all() {
            let model = train(&kind, &ds, &[false, false], 1).unwrap();
            assert!(model.is_prior());
            let p = model.predict_proba(ds.x()).unwrap();
            for row in p.outer_iter() {
                assert!((row[0] - 0.6).abs() < 1e-15 && (row[1] - 0.4).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mask_length_and_width_are_checked() {
        let ds = two_class(5, 5);
        assert!(matches!(
            train(&ModelKind::all()[0], &ds, &[true], 0),
            Err(Error::Shape { .. })
        ));
        let model = train_full(&ModelKind::all()[0], &ds, 0).unwrap();
        let narrow = Array2::zeros((3, 1));
        assert!(matches!(model.predict_proba(&narrow), Err(Error::Shape { .. })));
    }

    #[test]
    fn svm_is_not_offered() {
        assert!("svm".parse::<ModelKind>().is_err());
        assert_eq!(ModelKind::all().len(), 5);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn probabilities_are_simplices_for_every_kind() {
        let s = split(&iris(), 0.2, 3).unwrap();
        for kind in ModelKind::all() {
            let model = train_full(&kind, &s.train, 5).unwrap();
            let p = model.predict_proba(s.test.x()).unwrap();
            for row in p.outer_iter() {
                assert!(row.iter().all(|&v| v >= 0.0), "{kind}");
                assert!((row.sum() - 1.0).abs() <= 1e-9, "{kind}");
            }
        }
    }

    #[test]
    fn masked_columns_are_opaque() {
        let s = split(&iris(), 0.2, 3).unwrap();
        let mask = [true, false, true, false];
        let mut rng = crate::seed::rng(99);
        let mut scrambled = s.test.x().clone();
        for mut row in scrambled.outer_iter_mut() {
            row[1] = rng.random_range(-50.0..50.0);
            row[3] = rng.random_range(-50.0..50.0);
        }
        for kind in ModelKind::all() {
            let model = train(&kind, &s.train, &mask, 5).unwrap();
            assert_eq!(
                model.predict_proba(s.test.x()).unwrap(),
                model.predict_proba(&scrambled).unwrap(),
                "{kind}"
            );
        }
    }

    #[test]
    fn training_is_deterministic() {
        let s = split(&iris(), 0.2, 3).unwrap();
        for kind in ModelKind::all() {
            let a = train_full(&kind, &s.train, 17).unwrap();
            let b = train_full(&kind, &s.train, 17).unwrap();
            assert_eq!(a, b, "{kind}");
        }
    }

    #[test]
    fn row_permutation_permutes_output() {
        let s = split(&iris(), 0.2, 3).unwrap();
        let model = train_full(&"rf".parse().unwrap(), &s.train, 2).unwrap();
        let rows: Vec<usize> = (0..s.test.n_rows()).rev().collect();
        let permuted = s.test.select_rows(&rows);
        let a = model.predict_proba(s.test.x()).unwrap();
        let b = model.predict_proba(permuted.x()).unwrap();
        for (i, &r) in rows.iter().enumerate() {
            assert_eq!(a.row(r), b.row(i));
        }
    }

    #[test]
    fn json_round_trip() {
        let s = split(&iris(), 0.2, 3).unwrap();
        for kind in ModelKind::all() {
            let model = train_full(&kind, &s.train, 4).unwrap();
            let back = TrainedModel::from_json(&model.to_json().unwrap()).unwrap();
            assert_eq!(
                model.predict_proba(s.test.x()).unwrap(),
                back.predict_proba(s.test.x()).unwrap()
            );
        }
    }
}
