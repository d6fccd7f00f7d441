use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, RawColumn};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
    /// Present in the file but not used as a feature.
    Ignore,
}

/// Sidecar schema describing a dataset CSV, stored as TOML:
///
/// ```toml
/// name = "census"          # optional, defaults to the CSV file stem
/// target = "income"
///
/// [columns]
/// age = "continuous"
/// workclass = "categorical"
/// fnlwgt = "ignore"
/// ```
///
/// Every non-target CSV column must be listed under `[columns]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default)]
    pub name: Option<String>,
    pub target: String,
    pub columns: BTreeMap<String, ColumnKind>,
}

impl Schema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }
}

/// Load a CSV file described by `schema`.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    load_csv_str(&text, schema, &stem)
}

/// Load CSV text described by `schema`. `default_name` is used when the
/// schema does not name the dataset.
pub fn load_csv_str(text: &str, schema: &Schema, default_name: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let target_idx = header
        .iter()
        .position(|h| *h == schema.target)
        .ok_or_else(|| Error::Schema(format!("target column '{}' missing from CSV header", schema.target)))?;
    for name in schema.columns.keys() {
        if !header.contains(name) {
            return Err(Error::Schema(format!("column '{name}' missing from CSV header")));
        }
    }
    let mut kinds = Vec::with_capacity(header.len());
    for (i, h) in header.iter().enumerate() {
        if i == target_idx {
            kinds.push(None);
            continue;
        }
        match schema.columns.get(h) {
            Some(ColumnKind::Ignore) => kinds.push(None),
            Some(kind) => kinds.push(Some(*kind)),
            None => return Err(Error::Schema(format!("column '{h}' is not declared in the schema"))),
        }
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row: row + 1,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (i, field) in record.iter().enumerate() {
            if (kinds[i].is_some() || i == target_idx) && (field.is_empty() || field == "?") {
                return Err(Error::Parse {
                    row: row + 1,
                    column: header[i].clone(),
                    message: "missing value".into(),
                });
            }
            cells[i].push(field.to_string());
        }
    }

    let mut raw = Vec::new();
    for (i, kind) in kinds.iter().enumerate() {
        match kind {
            Some(ColumnKind::Continuous) => {
                let values = cells[i]
                    .iter()
                    .enumerate()
                    .map(|(row, s)| {
                        s.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| Error::Parse {
                                row: row + 1,
                                column: header[i].clone(),
                                message: format!("'{s}' is not a finite number"),
                            })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                raw.push(RawColumn::continuous(header[i].clone(), values));
            }
            Some(ColumnKind::Categorical) => {
                raw.push(RawColumn::categorical(header[i].clone(), std::mem::take(&mut cells[i])));
            }
            _ => {}
        }
    }

    let name = schema.name.clone().unwrap_or_else(|| default_name.to_string());
    Dataset::from_raw(name, raw, &cells[target_idx])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(target: &str, cols: &[(&str, ColumnKind)]) -> Schema {
        Schema {
            name: None,
            target: target.into(),
            columns: cols.iter().map(|(n, k)| (n.to_string(), *k)).collect(),
        }
    }

    #[test]
    fn two_row_categorical_is_one_hot() {
        let s = schema("y", &[("c", ColumnKind::Categorical)]);
        let ds = load_csv_str("c,y\nleft,0\nright,1\n", &s, "toy").unwrap();
        assert_eq!(ds.n_columns(), 2);
        assert_eq!(ds.x().row(0).to_vec(), vec![1.0, 0.0]);
        assert_eq!(ds.x().row(1).to_vec(), vec![0.0, 1.0]);
    }

    #[test]
    fn missing_schema_column_is_a_schema_error() {
        let s = schema("y", &[("a", ColumnKind::Continuous), ("b", ColumnKind::Continuous)]);
        let err = load_csv_str("a,y\n1,0\n2,1\n", &s, "toy").unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn undeclared_column_is_a_schema_error() {
        let s = schema("y", &[("a", ColumnKind::Continuous)]);
        let err = load_csv_str("a,b,y\n1,2,0\n2,3,1\n", &s, "toy").unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn non_numeric_continuous_value_reports_coordinates() {
        let s = schema("y", &[("a", ColumnKind::Continuous)]);
        let err = load_csv_str("a,y\n1,0\nabc,1\n", &s, "toy").unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "a");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_values_are_rejected() {
        let s = schema("y", &[("a", ColumnKind::Continuous)]);
        assert!(load_csv_str("a,y\n?,0\n2,1\n", &s, "toy").is_err());
        assert!(load_csv_str("a,y\n1,0\n,1\n", &s, "toy").is_err());
    }

    #[test]
    fn single_class_target_is_a_validation_error() {
        let s = schema("y", &[("a", ColumnKind::Continuous)]);
        let err = load_csv_str("a,y\n1,k\n2,k\n", &s, "toy").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn ignored_columns_are_dropped() {
        let s = schema("y", &[("a", ColumnKind::Continuous), ("id", ColumnKind::Ignore)]);
        let ds = load_csv_str("id,a,y\nr1,1,0\nr2,2,1\n", &s, "toy").unwrap();
        assert_eq!(ds.column_names(), vec!["a"]);
    }

    #[test]
    fn schema_round_trips_through_toml() {
        let s = Schema::from_toml_str(
            "name = \"t\"\ntarget = \"y\"\n[columns]\nage = \"continuous\"\njob = \"categorical\"\n",
        )
        .unwrap();
        assert_eq!(s.columns["job"], ColumnKind::Categorical);
        assert_eq!(Schema::from_toml_str(&s.to_toml_string()).unwrap(), s);
    }
}
