//! Relative feature importance vectors: nonnegative, sum-to-one weights
//! over the encoded columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfiSource {
    /// Normalized absolute Shapley attributions.
    StaticShap,
    /// Normalized deviations of the weighted perturbation average from the
    /// unperturbed score.
    DynamicAnwa,
}

/// Where an importance vector came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: String,
    pub model: String,
    /// Class policy for static vectors, metric label for dynamic ones.
    pub detail: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(dataset: impl Into<String>, model: impl Into<String>, detail: impl Into<String>, seed: u64) -> Self {
        Self {
            dataset: dataset.into(),
            model: model.into(),
            detail: detail.into(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfiVector {
    values: Vec<f64>,
    feature_names: Vec<String>,
    source: RfiSource,
    provenance: Provenance,
    /// Set when every magnitude was zero and the uniform vector was emitted.
    degenerate: bool,
}

impl RfiVector {
    /// Normalize nonnegative `magnitudes` to sum one. An all-zero input
    /// yields the uniform vector with the degenerate flag set.
    pub fn from_magnitudes(
        magnitudes: Vec<f64>,
        feature_names: Vec<String>,
        source: RfiSource,
        provenance: Provenance,
    ) -> Result<Self> {
        if magnitudes.is_empty() {
            return Err(Error::Validation("importance vector needs at least one feature".into()));
        }
        if magnitudes.len() != feature_names.len() {
            return Err(Error::Shape {
                expected: format!("{} feature names", magnitudes.len()),
                got: feature_names.len().to_string(),
            });
        }
        if magnitudes.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation("importance magnitudes must be finite and nonnegative".into()));
        }
        let total: f64 = magnitudes.iter().sum();
        let (values, degenerate) = if total > 0.0 {
            (magnitudes.iter().map(|v| v / total).collect(), false)
        } else {
            let m = magnitudes.len() as f64;
            (vec![1.0 / m; magnitudes.len()], true)
        };
        Ok(Self {
            values,
            feature_names,
            source,
            provenance,
            degenerate,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn source(&self) -> RfiSource {
        self.source
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(m: usize) -> Vec<String> {
        (0..m).map(|j| format!("f{j}")).collect()
    }

    fn prov() -> Provenance {
        Provenance::new("d", "m", "x", 0)
    }

    #[test]
    fn normalizes_to_one() {
        let v = RfiVector::from_magnitudes(vec![3.0, 1.0, 0.0], names(3), RfiSource::StaticShap, prov()).unwrap();
        assert_eq!(v.values(), &[0.75, 0.25, 0.0]);
        assert!(!v.is_degenerate());
    }

    #[test]
    fn all_zero_falls_back_to_uniform() {
        let v = RfiVector::from_magnitudes(vec![0.0; 4], names(4), RfiSource::DynamicAnwa, prov()).unwrap();
        assert_eq!(v.values(), &[0.25; 4]);
        assert!(v.is_degenerate());
    }

    #[test]
    fn rejects_negative_or_mismatched_input() {
        assert!(RfiVector::from_magnitudes(vec![-1.0, 1.0], names(2), RfiSource::StaticShap, prov()).is_err());
        assert!(RfiVector::from_magnitudes(vec![1.0, 1.0], names(3), RfiSource::StaticShap, prov()).is_err());
    }
}
