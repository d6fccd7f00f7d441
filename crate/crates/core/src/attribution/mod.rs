//! Static attributions: Shapley values of each test datapoint's target-class
//! probability, computed either exactly by retraining one model per feature
//! subset or approximately by permutation sampling against a background set.

mod background;
mod marginal;
mod retrain;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfi::{Provenance, RfiSource, RfiVector};

pub use background::summarize_background;
pub use marginal::{shapley_marginal, shapley_marginal_with, MarginalOptions};
pub use retrain::{shapley_retrain, shapley_retrain_with, shapley_weight, RetrainOptions, SubsetMask};

/// Largest feature count the exact backend accepts by default.
pub const DEFAULT_EXACT_CAP: usize = 12;
/// Default number of sampled permutations per datapoint.
pub const DEFAULT_SAMPLE_BUDGET: usize = 200;
/// Default number of k-means background centroids.
pub const DEFAULT_BACKGROUND_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Subset retraining, exact.
    RetrainExact,
    /// Permutation sampling against a background set.
    MarginalSampling,
}

impl Backend {
    /// Exact when the feature count fits under `cap`.
    pub fn auto(m: usize, cap: usize) -> Backend {
        if m <= cap {
            Backend::RetrainExact
        } else {
            Backend::MarginalSampling
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::RetrainExact => "retrain",
            Backend::MarginalSampling => "marginal",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "retrain" | "exact" => Ok(Backend::RetrainExact),
            "marginal" | "sampling" => Ok(Backend::MarginalSampling),
            other => Err(Error::Config(format!("unknown attribution backend '{other}'"))),
        }
    }
}

/// Which class probability is explained for each datapoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassPolicy {
    /// The datapoint's true label.
    #[default]
    TrueLabel,
    /// The full model's predicted label.
    Predicted,
}

impl fmt::Display for ClassPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassPolicy::TrueLabel => "true_label",
            ClassPolicy::Predicted => "predicted",
        })
    }
}

/// Per-datapoint, per-feature Shapley values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix {
    /// `n × m`; entry `(i, j)` is the attribution of feature `j` for datapoint `i`.
    pub values: Array2<f64>,
    pub feature_names: Vec<String>,
    pub backend: Backend,
    /// Expected target-class probability with no features revealed.
    pub baseline: Vec<f64>,
    /// Target-class probability of the full model.
    pub prediction: Vec<f64>,
    /// Explained class per datapoint.
    pub targets: Vec<usize>,
    pub policy: ClassPolicy,
    /// Permutations per datapoint (sampling backend only).
    pub sample_budget: Option<usize>,
    pub seed: u64,
    pub dataset: String,
    pub model: String,
}

impl AttributionMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    /// Largest `|Σ_j φ_ij − (prediction_i − baseline_i)|` over datapoints.
    pub fn efficiency_gap(&self) -> f64 {
        self.values
            .outer_iter()
            .enumerate()
            .map(|(i, row)| (row.sum() - (self.prediction[i] - self.baseline[i])).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with one row per datapoint: `row`, one column per feature,
    /// then `baseline`, `prediction` and `target`.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["row".to_string()];
        header.extend(self.feature_names.iter().cloned());
        header.extend(["baseline", "prediction", "target"].map(String::from));
        w.write_record(&header)?;
        for (i, row) in self.values.outer_iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| format!("{v:.12}")));
            rec.push(format!("{:.12}", self.baseline[i]));
            rec.push(format!("{:.12}", self.prediction[i]));
            rec.push(self.targets[i].to_string());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Absolute-normalized importance: each feature's summed absolute
/// attribution over all datapoints, divided by the grand total.
pub fn static_rfi(attr: &AttributionMatrix) -> Result<RfiVector> {
    if attr.n_rows() == 0 {
        return Err(Error::Validation("attribution matrix has no rows".into()));
    }
    let mut totals = vec![0.0; attr.n_features()];
    for (j, total) in totals.iter_mut().enumerate() {
        for i in 0..attr.n_rows() {
            *total += attr.values[[i, j]].abs();
        }
    }
    RfiVector::from_magnitudes(
        totals,
        attr.feature_names.clone(),
        RfiSource::StaticShap,
        Provenance::new(&attr.dataset, &attr.model, attr.policy.to_string(), attr.seed),
    )
}

/// Optional wall-clock limit checked between units of work.
#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    at: Instant,
    budget: std::time::Duration,
}

impl Deadline {
    pub fn after(budget: std::time::Duration) -> Self {
        Self {
            at: Instant::now() + budget,
            budget,
        }
    }

    pub fn check(&self) -> Result<()> {
        if Instant::now() > self.at {
            Err(Error::Budget(self.budget))
        } else {
            Ok(())
        }
    }
}

pub(crate) fn check_deadline(deadline: Option<&Deadline>) -> Result<()> {
    deadline.map_or(Ok(()), Deadline::check)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(values: Vec<f64>, n: usize, m: usize) -> AttributionMatrix {
        AttributionMatrix {
            values: Array2::from_shape_vec((n, m), values).unwrap(),
            feature_names: (0..m).map(|j| format!("f{j}")).collect(),
            backend: Backend::RetrainExact,
            baseline: vec![0.0; n],
            prediction: vec![0.0; n],
            targets: vec![0; n],
            policy: ClassPolicy::TrueLabel,
            sample_budget: None,
            seed: 0,
            dataset: "d".into(),
            model: "m".into(),
        }
    }

    #[test]
    fn single_datapoint_rfi() {
        let rfi = static_rfi(&matrix(vec![0.3, -0.1, 0.0, 0.0], 1, 4)).unwrap();
        let want = [0.75, 0.25, 0.0, 0.0];
        for (g, w) in rfi.values().iter().zip(want) {
            assert!((g - w).abs() < 1e-15);
        }
    }

    #[test]
    fn all_zero_attributions_are_degenerate() {
        let rfi = static_rfi(&matrix(vec![0.0; 8], 2, 4)).unwrap();
        assert!(rfi.is_degenerate());
        assert_eq!(rfi.values(), &[0.25; 4]);
    }

    #[test]
    fn rfi_is_invariant_to_scaling() {
        let base = vec![0.2, -0.5, 0.1, 0.05, 0.0, -0.3];
        let a = static_rfi(&matrix(base.clone(), 2, 3)).unwrap();
        for c in [-3.0, 0.01, 7.5] {
            let b = static_rfi(&matrix(base.iter().map(|v| v * c).collect(), 2, 3)).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_matrix_is_rejected() {
        assert!(static_rfi(&matrix(vec![], 0, 3)).is_err());
    }

    #[test]
    fn csv_export_has_baseline_column() {
        let csv = matrix(vec![0.1, 0.2], 1, 2).to_csv_string().unwrap();
        let header = csv.lines().next().unwrap();
        assert_eq!(header, "row,f0,f1,baseline,prediction,target");
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn auto_backend() {
        assert_eq!(Backend::auto(12, DEFAULT_EXACT_CAP), Backend::RetrainExact);
        assert_eq!(Backend::auto(13, DEFAULT_EXACT_CAP), Backend::MarginalSampling);
    }
}
