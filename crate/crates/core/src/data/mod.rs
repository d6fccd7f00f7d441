//! Tabular datasets: schema-driven CSV ingestion with one-hot expansion,
//! seeded train/test splitting and subsampling, bundled fixtures and two
//! synthetic generators.

mod bundled;
mod load;
mod split;
mod synth;

use std::collections::HashSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bundled::{breast_cancer, bundled, iris, wine, BUNDLED_NAMES};
pub use load::{load_csv, load_csv_str, ColumnKind, Schema};
pub use split::{split, split_with, subsample, DataSplit, SplitMode};
pub use synth::{synth_census, synth_fraud, CENSUS_RAW_FEATURES, FRAUD_RAW_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

/// A raw (pre-encoding) feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Distinct category labels in first-appearance order; empty for
    /// continuous features.
    pub categories: Vec<String>,
}

/// One encoded column of `X`. Continuous features map to one column; a
/// categorical feature maps to one boolean indicator column per category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    /// Index into [`Dataset::features`].
    pub source: usize,
    /// Category index within the source feature, for indicator columns.
    pub category: Option<usize>,
}

impl Column {
    pub fn is_indicator(&self) -> bool {
        self.category.is_some()
    }
}

/// Raw column values prior to encoding.
#[derive(Debug, Clone)]
pub enum RawValues {
    Continuous(Vec<f64>),
    Categorical(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct RawColumn {
    pub name: String,
    pub values: RawValues,
}

impl RawColumn {
    pub fn continuous(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values: RawValues::Continuous(values),
        }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<String>) -> Self {
        Self {
            name: name.into(),
            values: RawValues::Categorical(values),
        }
    }

    fn len(&self) -> usize {
        match &self.values {
            RawValues::Continuous(v) => v.len(),
            RawValues::Categorical(v) => v.len(),
        }
    }
}

/// An encoded classification dataset.
///
/// Immutable once built. Datasets produced by [`Dataset::new`] and
/// [`Dataset::from_raw`] contain every class at least once; row subsets
/// (test partitions, perturbed copies, background summaries) keep the parent's
/// class list but may lack some classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Vec<FeatureSpec>,
    columns: Vec<Column>,
    x: Array2<f64>,
    y: Vec<usize>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Vec<FeatureSpec>,
        columns: Vec<Column>,
        x: Array2<f64>,
        y: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let ds = Self {
            name: name.into(),
            features,
            columns,
            x,
            y,
            class_names,
        };
        ds.check_structure()?;
        ds.check_class_presence()?;
        Ok(ds)
    }

    /// Encode raw columns: continuous columns pass through, categorical
    /// columns expand into one indicator per distinct label (first-appearance
    /// order). Target labels become dense indices in first-appearance order.
    pub fn from_raw(name: impl Into<String>, raw: Vec<RawColumn>, target: &[String]) -> Result<Self> {
        let n = target.len();
        if let Some(bad) = raw.iter().find(|c| c.len() != n) {
            return Err(Error::Shape {
                expected: format!("{n} values in column '{}'", bad.name),
                got: bad.len().to_string(),
            });
        }

        let (class_names, y) = dense_labels(target);
        if class_names.len() < 2 {
            return Err(Error::Validation(format!(
                "target has {} distinct class(es); at least 2 are required",
                class_names.len()
            )));
        }

        let mut features = Vec::with_capacity(raw.len());
        let mut columns = Vec::new();
        let mut data: Vec<Vec<f64>> = Vec::new();
        for (source, col) in raw.into_iter().enumerate() {
            match col.values {
                RawValues::Continuous(values) => {
                    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
                        return Err(Error::Parse {
                            row,
                            column: col.name,
                            message: "non-finite value".into(),
                        });
                    }
                    columns.push(Column {
                        name: col.name.clone(),
                        source,
                        category: None,
                    });
                    data.push(values);
                    features.push(FeatureSpec {
                        name: col.name,
                        kind: FeatureKind::Continuous,
                        categories: Vec::new(),
                    });
                }
                RawValues::Categorical(values) => {
                    let (categories, codes) = dense_labels(&values);
                    if categories.len() < 2 {
                        return Err(Error::Validation(format!(
                            "categorical feature '{}' has fewer than 2 categories",
                            col.name
                        )));
                    }
                    for (c, label) in categories.iter().enumerate() {
                        columns.push(Column {
                            name: format!("{}={}", col.name, label),
                            source,
                            category: Some(c),
                        });
                        data.push(codes.iter().map(|&k| if k == c { 1.0 } else { 0.0 }).collect());
                    }
                    features.push(FeatureSpec {
                        name: col.name,
                        kind: FeatureKind::Categorical,
                        categories,
                    });
                }
            }
        }

        let m = columns.len();
        let x = Array2::from_shape_fn((n, m), |(i, j)| data[j][i]);
        Self::new(name, features, columns, x, y, class_names)
    }

    fn check_structure(&self) -> Result<()> {
        let (n, m) = self.x.dim();
        if self.y.len() != n {
            return Err(Error::Shape {
                expected: format!("{n} labels"),
                got: self.y.len().to_string(),
            });
        }
        if self.columns.len() != m {
            return Err(Error::Shape {
                expected: format!("{m} column descriptors"),
                got: self.columns.len().to_string(),
            });
        }
        let c = self.class_names.len();
        if c < 2 {
            return Err(Error::Validation("class_count must be at least 2".into()));
        }
        if let Some(&bad) = self.y.iter().find(|&&l| l >= c) {
            return Err(Error::Validation(format!("label {bad} outside [0, {c})")));
        }
        let mut seen = HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Validation(format!("duplicate feature name '{}'", f.name)));
            }
            match f.kind {
                FeatureKind::Continuous if !f.categories.is_empty() => {
                    return Err(Error::Validation(format!(
                        "continuous feature '{}' declares categories",
                        f.name
                    )))
                }
                FeatureKind::Categorical if f.categories.len() < 2 => {
                    return Err(Error::Validation(format!(
                        "categorical feature '{}' has fewer than 2 categories",
                        f.name
                    )))
                }
                _ => {}
            }
        }
        for (j, col) in self.columns.iter().enumerate() {
            let spec = self.features.get(col.source).ok_or_else(|| {
                Error::Validation(format!("column '{}' refers to unknown feature", col.name))
            })?;
            let consistent = match (spec.kind, col.category) {
                (FeatureKind::Continuous, None) => true,
                (FeatureKind::Categorical, Some(k)) => k < spec.categories.len(),
                _ => false,
            };
            if !consistent {
                return Err(Error::Validation(format!(
                    "column '{}' disagrees with the kind of feature '{}'",
                    col.name, spec.name
                )));
            }
            let column = self.x.column(j);
            if let Some(i) = column.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: i,
                    column: col.name.clone(),
                    message: "non-finite value".into(),
                });
            }
            if col.is_indicator() {
                if let Some(i) = column.iter().position(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::Validation(format!(
                        "indicator column '{}' holds {} at row {i}",
                        col.name, column[i]
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_class_presence(&self) -> Result<()> {
        match self.missing_class() {
            Some(c) => Err(Error::Validation(format!(
                "class '{}' has no rows in dataset '{}'",
                self.class_names[c], self.name
            ))),
            None => Ok(()),
        }
    }

    /// The lowest class index with no rows, if any.
    pub fn missing_class(&self) -> Option<usize> {
        let counts = self.class_counts();
        counts.iter().position(|&k| k == 0)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count()];
        for &l in &self.y {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `rows` (in that order). Class presence is not re-validated.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.clone(),
            columns: self.columns.clone(),
            x: self.x.select(ndarray::Axis(0), rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Same schema and labels with a replaced feature matrix.
    pub(crate) fn with_x(&self, x: Array2<f64>) -> Dataset {
        debug_assert_eq!(x.dim(), self.x.dim());
        Dataset {
            name: self.name.clone(),
            features: self.features.clone(),
            columns: self.columns.clone(),
            x,
            y: self.y.clone(),
            class_names: self.class_names.clone(),
        }
    }

    /// Replace rows and labels wholesale, keeping the schema. Structure is
    /// validated; class presence is not.
    pub fn with_rows(&self, name: impl Into<String>, x: Array2<f64>, y: Vec<usize>) -> Result<Dataset> {
        let ds = Dataset {
            name: name.into(),
            features: self.features.clone(),
            columns: self.columns.clone(),
            x,
            y,
            class_names: self.class_names.clone(),
        };
        ds.check_structure()?;
        Ok(ds)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Raw features, before one-hot expansion.
    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    /// Encoded columns, one per column of `x`.
    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn is_indicator(&self, j: usize) -> bool {
        self.columns[j].is_indicator()
    }

    /// Indicator columns that encode the same raw feature as column `j`
    /// (including `j` itself). Empty for continuous columns.
    pub fn siblings(&self, j: usize) -> Vec<usize> {
        if !self.columns[j].is_indicator() {
            return Vec::new();
        }
        let source = self.columns[j].source;
        (0..self.columns.len())
            .filter(|&k| self.columns[k].source == source)
            .collect()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    /// Number of encoded feature columns.
    pub fn n_columns(&self) -> usize {
        self.x.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }
}

/// Map labels to dense indices in first-appearance order.
fn dense_labels(values: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut names: Vec<String> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let codes = values
        .iter()
        .map(|v| {
            *index.entry(v.as_str()).or_insert_with(|| {
                names.push(v.clone());
                names.len() - 1
            })
        })
        .collect();
    (names, codes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn one_hot_expansion_in_first_appearance_order() {
        let ds = Dataset::from_raw(
            "toy",
            vec![
                RawColumn::continuous("a", vec![1.0, 2.0, 3.0]),
                RawColumn::categorical("color", strings(&["red", "blue", "red"])),
            ],
            &strings(&["yes", "no", "no"]),
        )
        .unwrap();
        assert_eq!(ds.n_columns(), 3);
        assert_eq!(ds.column_names(), vec!["a", "color=red", "color=blue"]);
        assert_eq!(ds.y(), &[0, 1, 1]);
        assert_eq!(ds.class_names(), &["yes".to_string(), "no".to_string()]);
        assert_eq!(ds.x().row(1).to_vec(), vec![2.0, 0.0, 1.0]);
        assert_eq!(ds.siblings(2), vec![1, 2]);
        assert!(ds.siblings(0).is_empty());
    }

    #[test]
    fn single_class_target_is_rejected() {
        let err = Dataset::from_raw(
            "toy",
            vec![RawColumn::continuous("a", vec![1.0, 2.0])],
            &strings(&["x", "x"]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn indicator_columns_must_be_boolean() {
        let ds = Dataset::from_raw(
            "toy",
            vec![RawColumn::categorical("c", strings(&["u", "v"]))],
            &strings(&["a", "b"]),
        )
        .unwrap();
        let mut x = ds.x().clone();
        x[[0, 0]] = 0.5;
        assert!(ds.with_rows("bad", x, ds.y().to_vec()).is_err());
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let err = Dataset::from_raw(
            "toy",
            vec![RawColumn::continuous("a", vec![1.0, f64::NAN])],
            &strings(&["x", "y"]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }));
    }
}
