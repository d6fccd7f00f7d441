//! Exact Shapley regression values: one model per feature subset, with the
//! empty subset served by the prior model.

use ndarray::Array2;
use rayon::prelude::*;

use super::{check_deadline, AttributionMatrix, Backend, ClassPolicy, Deadline, DEFAULT_EXACT_CAP};
use crate::data::DataSplit;
use crate::error::{Error, Result};
use crate::models::{self, argmax, ModelKind};

/// A subset of feature indices, stored as bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetMask(u64);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    pub fn from_bits(bits: u64) -> Self {
        Self(bits)
    }

    pub fn full(m: usize) -> Self {
        Self(if m >= 64 { u64::MAX } else { (1u64 << m) - 1 })
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn cardinality(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, j: usize) -> bool {
        self.0 >> j & 1 == 1
    }

    pub fn with(self, j: usize) -> Self {
        Self(self.0 | 1 << j)
    }

    pub fn feature_mask(self, m: usize) -> Vec<bool> {
        (0..m).map(|j| self.contains(j)).collect()
    }
}

/// `|S|! (m − |S| − 1)! / m!`, the weight of a marginal contribution over a
/// coalition of size `s` among `m` players.
pub fn shapley_weight(s: usize, m: usize) -> f64 {
    debug_assert!(s < m);
    // Product form keeps intermediates small: 1 / (m · C(m−1, s)).
    let mut binom = 1.0;
    for i in 0..s {
        binom *= (m - 1 - i) as f64 / (i + 1) as f64;
    }
    1.0 / (m as f64 * binom)
}

#[derive(Debug, Clone)]
pub struct RetrainOptions {
    pub seed: u64,
    pub policy: ClassPolicy,
    pub max_features: usize,
    pub deadline: Option<Deadline>,
}

impl Default for RetrainOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            policy: ClassPolicy::TrueLabel,
            max_features: DEFAULT_EXACT_CAP,
            deadline: None,
        }
    }
}

/// Exact attributions for every row of `split.test`, explaining the true label.
pub fn shapley_retrain(kind: &ModelKind, split: &DataSplit, seed: u64) -> Result<AttributionMatrix> {
    shapley_retrain_with(
        kind,
        split,
        &RetrainOptions {
            seed,
            ..RetrainOptions::default()
        },
    )
}

pub fn shapley_retrain_with(kind: &ModelKind, split: &DataSplit, opts: &RetrainOptions) -> Result<AttributionMatrix> {
    let m = split.train.n_columns();
    let cap = opts.max_features.min(20);
    if m > cap {
        return Err(Error::TooManyFeatures { m, cap });
    }
    let test = &split.test;
    let n = test.n_rows();
    let subsets = 1usize << m;

    // Every subset model uses the same seed, so subset models are functions
    // of their masks alone.
    let outputs: Vec<Array2<f64>> = (0..subsets as u64)
        .into_par_iter()
        .map(|bits| {
            check_deadline(opts.deadline.as_ref())?;
            let mask = SubsetMask(bits).feature_mask(m);
            let model = models::train(kind, &split.train, &mask, opts.seed)?;
            model.predict_proba(test.x())
        })
        .collect::<Result<_>>()?;

    let full = &outputs[subsets - 1];
    let targets: Vec<usize> = match opts.policy {
        ClassPolicy::TrueLabel => test.y().to_vec(),
        ClassPolicy::Predicted => full
            .outer_iter()
            .map(|r| argmax(r.as_slice().expect("contiguous")))
            .collect(),
    };

    let weights: Vec<f64> = (0..m).map(|s| shapley_weight(s, m)).collect();
    let mut values = Array2::zeros((n, m));
    let mut value = vec![0.0; subsets];
    for i in 0..n {
        let t = targets[i];
        for (s, v) in value.iter_mut().enumerate() {
            *v = outputs[s][[i, t]];
        }
        for j in 0..m {
            let mut phi = 0.0;
            for s in 0..subsets as u64 {
                let mask = SubsetMask(s);
                if mask.contains(j) {
                    continue;
                }
                let with = mask.with(j).0 as usize;
                phi += weights[mask.cardinality()] * (value[with] - value[s as usize]);
            }
            values[[i, j]] = phi;
        }
    }

    Ok(AttributionMatrix {
        values,
        feature_names: test.column_names(),
        backend: Backend::RetrainExact,
        baseline: (0..n).map(|i| outputs[0][[i, targets[i]]]).collect(),
        prediction: (0..n).map(|i| full[[i, targets[i]]]).collect(),
        targets,
        policy: opts.policy,
        sample_budget: None,
        seed: opts.seed,
        dataset: test.name().to_string(),
        model: kind.name().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split, Dataset, RawColumn};

    #[test]
    fn weights_match_factorial_form() {
        fn fact(k: usize) -> f64 {
            (1..=k).map(|v| v as f64).product()
        }
        for m in 1..=12 {
            for s in 0..m {
                let want = fact(s) * fact(m - s - 1) / fact(m);
                assert!((shapley_weight(s, m) - want).abs() <= 1e-15 * want.max(1.0), "s={s} m={m}");
            }
            // Weights over all coalitions not containing a player sum to one.
            let total: f64 = (0..m)
                .map(|s| {
                    let binom: f64 = (0..s).map(|i| (m - 1 - i) as f64 / (i + 1) as f64).product();
                    binom * shapley_weight(s, m)
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn subset_mask_basics() {
        let s = SubsetMask::from_bits(0b1010);
        assert_eq!(s.cardinality(), 2);
        assert!(s.contains(1) && s.contains(3) && !s.contains(0));
        assert_eq!(s.with(0).bits(), 0b1011);
        assert_eq!(SubsetMask::full(4).bits(), 0b1111);
        assert_eq!(s.feature_mask(4), vec![false, true, false, true]);
    }

    fn dataset(m: usize, n: usize) -> Dataset {
        let cols = (0..m)
            .map(|j| RawColumn::continuous(format!("x{j}"), (0..n).map(|i| ((i * (j + 3)) % 11) as f64).collect()))
            .collect();
        let labels: Vec<String> = (0..n).map(|i| ((i * 3 % 11) > 5).to_string()).collect();
        Dataset::from_raw("toy", cols, &labels).unwrap()
    }

    #[test]
    fn single_feature_collapses_to_one_difference() {
        let ds = dataset(1, 40);
        let s = split(&ds, 0.25, 1).unwrap();
        let kind: ModelKind = "logit".parse().unwrap();
        let attr = shapley_retrain(&kind, &s, 3).unwrap();
        let full = models::train_full(&kind, &s.train, 3).unwrap().predict_proba(s.test.x()).unwrap();
        let prior = models::train(&kind, &s.train, &[false], 3).unwrap().predict_proba(s.test.x()).unwrap();
        for i in 0..s.test.n_rows() {
            let y = s.test.y()[i];
            assert_eq!(attr.values[[i, 0]], full[[i, y]] - prior[[i, y]]);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let ds = dataset(5, 40);
        let s = split(&ds, 0.25, 1).unwrap();
        let opts = RetrainOptions {
            max_features: 4,
            ..RetrainOptions::default()
        };
        let err = shapley_retrain_with(&"logit".parse().unwrap(), &s, &opts).unwrap_err();
        assert!(matches!(err, Error::TooManyFeatures { m: 5, cap: 4 }));
    }

    #[test]
    fn predicted_policy_explains_the_argmax() {
        let ds = dataset(2, 40);
        let s = split(&ds, 0.25, 1).unwrap();
        let kind: ModelKind = "knn".parse().unwrap();
        let opts = RetrainOptions {
            policy: ClassPolicy::Predicted,
            ..RetrainOptions::default()
        };
        let attr = shapley_retrain_with(&kind, &s, &opts).unwrap();
        let labels = models::train_full(&kind, &s.train, 0).unwrap().predict_labels(s.test.x()).unwrap();
        assert_eq!(attr.targets, labels);
        assert!(attr.efficiency_gap() < 1e-9);
    }
}
