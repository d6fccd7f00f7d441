//! Quantifies how well static feature attributions (Shapley values computed
//! against a fitted model) agree with dynamic explanations obtained by
//! perturbing the test set of that same model.
//!
//! The pipeline for one (dataset, model, metric) cell is:
//!
//! 1. [`data::split`] the dataset into train/test partitions;
//! 2. [`models::train`] a classifier on the training partition;
//! 3. compute a static attribution ([`attribution::shapley_retrain`] or
//!    [`attribution::shapley_marginal`]) and fold it into an [`RfiVector`];
//! 4. [`perturbation::sweep`] every feature over a [`PerturbationGrid`] and
//!    fold the weighted averages into a second [`RfiVector`];
//! 5. compare both vectors with [`comparison::harmony`].
//!
//! [`runner`] drives that pipeline over a whole experiment matrix.

pub mod attribution;
pub mod comparison;
pub mod data;
pub mod error;
pub mod metrics;
pub mod models;
pub mod perturbation;
pub mod rfi;
pub mod runner;
pub mod seed;

pub use attribution::{AttributionMatrix, Backend, ClassPolicy, SubsetMask};
pub use comparison::{HarmonyReport, TopKSet};
pub use data::{DataSplit, Dataset, FeatureKind, FeatureSpec};
pub use error::{Error, Result};
pub use metrics::{Average, ConfusionCounts, Metric, MetricKind};
pub use models::{ModelKind, ProbabilisticClassifier, TrainedModel};
pub use perturbation::{PerturbationGrid, SweepResult};
pub use rfi::{Provenance, RfiSource, RfiVector};
