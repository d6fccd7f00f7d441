//! Agreement between a static and a dynamic importance vector: cosine
//! similarity and the Jaccard index of their top-k feature sets.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfi::{Provenance, RfiVector};

/// Cosine of two equal-length vectors, clamped to [0, 1] for nonnegative
/// inputs.
pub fn cosine_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            expected: format!("{} entries", a.len()),
            got: b.len().to_string(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    let c = dot / (na * nb);
    if a.iter().chain(b).all(|&v| v >= 0.0) {
        Ok(c.clamp(0.0, 1.0))
    } else {
        Ok(c.clamp(-1.0, 1.0))
    }
}

pub fn cosine(a: &RfiVector, b: &RfiVector) -> Result<f64> {
    check_names(a, b)?;
    cosine_slices(a.values(), b.values())
}

fn check_names(a: &RfiVector, b: &RfiVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            expected: format!("{} features", a.len()),
            got: b.len().to_string(),
        });
    }
    if a.feature_names() != b.feature_names() {
        return Err(Error::Pairing("feature names differ".into()));
    }
    Ok(())
}

/// The `k` highest-ranked features of a vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopKSet {
    pub k: usize,
    pub members: BTreeSet<String>,
}

/// Ranking by descending value, ties by ascending feature name.
pub fn ranking(v: &RfiVector) -> Vec<usize> {
    let (vals, names) = (v.values(), v.feature_names());
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]).then_with(|| names[i].cmp(&names[j])));
    order
}

pub fn top_k(v: &RfiVector, k: usize) -> Result<TopKSet> {
    if k == 0 || k > v.len() {
        return Err(Error::Bounds(format!("k = {k} outside [1, {}]", v.len())));
    }
    let members = ranking(v)
        .into_iter()
        .take(k)
        .map(|j| v.feature_names()[j].clone())
        .collect();
    Ok(TopKSet { k, members })
}

/// `|A ∩ B| / |A ∪ B|`; two empty sets count as identical.
pub fn jaccard(a: &TopKSet, b: &TopKSet) -> f64 {
    let union = a.members.union(&b.members).count();
    if union == 0 {
        return 1.0;
    }
    a.members.intersection(&b.members).count() as f64 / union as f64
}

/// Jaccard index of the top-k sets for k = 1..m.
pub fn jaccard_curve(a: &RfiVector, b: &RfiVector) -> Result<Vec<f64>> {
    check_names(a, b)?;
    let (ra, rb) = (ranking(a), ranking(b));
    let mut sa = BTreeSet::new();
    let mut sb = BTreeSet::new();
    Ok((0..a.len())
        .map(|k| {
            sa.insert(ra[k]);
            sb.insert(rb[k]);
            sa.intersection(&sb).count() as f64 / sa.union(&sb).count() as f64
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonyReport {
    pub cosine: f64,
    /// Entry `k − 1` holds the Jaccard index at `k`.
    pub jaccard_curve: Vec<f64>,
    pub feature_names: Vec<String>,
    pub static_source: Provenance,
    pub dynamic_source: Provenance,
    pub static_degenerate: bool,
    pub dynamic_degenerate: bool,
    /// Set when either vector is the uniform fallback.
    pub warning: Option<String>,
}

impl HarmonyReport {
    /// Mean of the Jaccard curve over `k = 1..=k_max` (clipped to `m`).
    pub fn mean_jaccard(&self, k_max: usize) -> f64 {
        let k = k_max.min(self.jaccard_curve.len()).max(1);
        self.jaccard_curve[..k].iter().sum::<f64>() / k as f64
    }

    /// Single-line JSON record.
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Cosine plus full Jaccard curve of a paired static and dynamic vector.
pub fn harmony(static_rfi: &RfiVector, dynamic_rfi: &RfiVector) -> Result<HarmonyReport> {
    let (ps, pd) = (static_rfi.provenance(), dynamic_rfi.provenance());
    if ps.dataset != pd.dataset || ps.model != pd.model || ps.seed != pd.seed {
        return Err(Error::Pairing(format!(
            "static ({}, {}, seed {}) vs dynamic ({}, {}, seed {})",
            ps.dataset, ps.model, ps.seed, pd.dataset, pd.model, pd.seed
        )));
    }
    let cosine = cosine(static_rfi, dynamic_rfi)?;
    let jaccard_curve = jaccard_curve(static_rfi, dynamic_rfi)?;
    let (sd, dd) = (static_rfi.is_degenerate(), dynamic_rfi.is_degenerate());
    let warning = match (sd, dd) {
        (false, false) => None,
        (true, false) => Some("static importance is uniform fallback".to_string()),
        (false, true) => Some("dynamic importance is uniform fallback".to_string()),
        (true, true) => Some("both importances are uniform fallback".to_string()),
    };
    Ok(HarmonyReport {
        cosine,
        jaccard_curve,
        feature_names: static_rfi.feature_names().to_vec(),
        static_source: ps.clone(),
        dynamic_source: pd.clone(),
        static_degenerate: sd,
        dynamic_degenerate: dd,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfi::RfiSource;
    use proptest::prelude::*;

    fn vector(values: &[f64], names: &[&str], source: RfiSource) -> RfiVector {
        RfiVector::from_magnitudes(
            values.to_vec(),
            names.iter().map(|s| s.to_string()).collect(),
            source,
            Provenance::new("d", "m", "x", 0),
        )
        .unwrap()
    }

    fn v(values: &[f64]) -> RfiVector {
        let names: Vec<String> = (0..values.len()).map(|j| format!("f{j}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        vector(values, &refs, RfiSource::StaticShap)
    }

    fn set(k: usize, items: &[&str]) -> TopKSet {
        TopKSet {
            k,
            members: items.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let a = v(&[0.2, 0.3, 0.5]);
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let dot = 0.75 * 0.4 + 0.25 * 0.3;
        let na = (0.75f64 * 0.75 + 0.25 * 0.25).sqrt();
        let nb = (0.16f64 + 0.09 + 0.04 + 0.01).sqrt();
        let c = cosine(&v(&[0.75, 0.25, 0.0, 0.0]), &v(&[0.4, 0.3, 0.2, 0.1])).unwrap();
        assert!((c - dot / (na * nb)).abs() < 1e-12);
        assert!((c - 0.8660).abs() < 1e-4);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(cosine_slices(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::UndefinedSimilarity)));
        assert!(cosine_slices(&[1.0], &[1.0, 0.0]).is_err());
        let a = vector(&[1.0, 2.0], &["a", "b"], RfiSource::StaticShap);
        let b = vector(&[1.0, 2.0], &["a", "c"], RfiSource::DynamicAnwa);
        assert!(matches!(cosine(&a, &b), Err(Error::Pairing(_))));
    }

    #[test]
    fn top_k_examples() {
        let a = v(&[0.5, 0.3, 0.2]);
        assert_eq!(top_k(&a, 1).unwrap(), set(1, &["f0"]));
        assert_eq!(top_k(&a, 3).unwrap().members.len(), 3);
        assert!(top_k(&a, 0).is_err());
        assert!(top_k(&a, 4).is_err());
        let tied = vector(&[0.4, 0.4, 0.2], &["b", "a", "c"], RfiSource::StaticShap);
        assert_eq!(top_k(&tied, 1).unwrap(), set(1, &["a"]));
    }

    #[test]
    fn jaccard_examples() {
        let a = set(2, &["petal length", "petal width"]);
        let b = set(2, &["petal width", "sepal length"]);
        assert_eq!(jaccard(&a, &b), 1.0 / 3.0);
        assert_eq!(jaccard(&a, &a), 1.0);
        assert_eq!(jaccard(&a, &set(2, &["x", "y"])), 0.0);
    }

    #[test]
    fn curve_matches_top_k_sets() {
        let a = v(&[0.1, 0.4, 0.2, 0.3, 0.0]);
        let b = v(&[0.3, 0.3, 0.1, 0.1, 0.2]);
        let curve = jaccard_curve(&a, &b).unwrap();
        for k in 1..=5 {
            let j = jaccard(&top_k(&a, k).unwrap(), &top_k(&b, k).unwrap());
            assert_eq!(curve[k - 1], j);
        }
        assert_eq!(curve[4], 1.0);
    }

    #[test]
    fn harmony_pairing_and_warning() {
        let s = vector(&[0.5, 0.5], &["a", "b"], RfiSource::StaticShap);
        let d = vector(&[0.0, 0.0], &["a", "b"], RfiSource::DynamicAnwa);
        let r = harmony(&s, &d).unwrap();
        assert!((r.cosine - 1.0).abs() < 1e-12);
        assert!(r.dynamic_degenerate && r.warning.is_some());
        assert_eq!(r.jaccard_curve, vec![1.0, 1.0]);
        assert!(!r.to_json_line().unwrap().contains('\n'));

        let other = RfiVector::from_magnitudes(
            vec![1.0, 0.0],
            vec!["a".into(), "b".into()],
            RfiSource::DynamicAnwa,
            Provenance::new("d", "m", "x", 9),
        )
        .unwrap();
        assert!(matches!(harmony(&s, &other), Err(Error::Pairing(_))));
    }

    fn positive_vec(m: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, m).prop_filter("nonzero", |v| v.iter().sum::<f64>() > 1e-6)
    }

    proptest! {
        #[test]
        fn cosine_is_scale_invariant_and_bounded(
            (a, b) in (2usize..12).prop_flat_map(|m| (positive_vec(m), positive_vec(m))),
            c in 0.01f64..100.0,
        ) {
            let base = cosine_slices(&a, &b).unwrap();
            let scaled: Vec<f64> = a.iter().map(|x| x * c).collect();
            prop_assert!((cosine_slices(&scaled, &b).unwrap() - base).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&base));
        }

        #[test]
        fn jaccard_curve_properties(
            (a, b) in (1usize..12).prop_flat_map(|m| (positive_vec(m), positive_vec(m))),
        ) {
            let (va, vb) = (v(&a), v(&b));
            let ab = jaccard_curve(&va, &vb).unwrap();
            let ba = jaccard_curve(&vb, &va).unwrap();
            prop_assert_eq!(&ab, &ba);
            prop_assert_eq!(*ab.last().unwrap(), 1.0);
            prop_assert!(ab[0] == 0.0 || ab[0] == 1.0);
        }
    }
}
