//! Permutation-sampling Shapley estimator with interventional (background)
//! expectations.
//!
//! For each sampled ordering of the features and a background row drawn
//! uniformly, features are revealed one at a time in that order: revealed
//! features take the explained datapoint's values, the rest keep the
//! background row's values. The change in target-class probability on each
//! reveal is that feature's marginal contribution for the sample.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use super::{check_deadline, AttributionMatrix, Backend, ClassPolicy, Deadline, DEFAULT_SAMPLE_BUDGET};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{argmax, predict_proba, ProbabilisticClassifier};
use crate::seed;

#[derive(Debug, Clone)]
pub struct MarginalOptions {
    pub sample_budget: usize,
    pub seed: u64,
    pub policy: ClassPolicy,
    /// Model label recorded in the result.
    pub model_name: String,
    pub deadline: Option<Deadline>,
}

impl Default for MarginalOptions {
    fn default() -> Self {
        Self {
            sample_budget: DEFAULT_SAMPLE_BUDGET,
            seed: 0,
            policy: ClassPolicy::TrueLabel,
            model_name: "custom".into(),
            deadline: None,
        }
    }
}

/// Estimate attributions for every row of `explain`, explaining the true label.
pub fn shapley_marginal<M: ProbabilisticClassifier + ?Sized>(
    model: &M,
    explain: &Dataset,
    background: &Dataset,
    sample_budget: usize,
    seed: u64,
) -> Result<AttributionMatrix> {
    shapley_marginal_with(
        model,
        explain,
        background,
        &MarginalOptions {
            sample_budget,
            seed,
            ..MarginalOptions::default()
        },
    )
}

pub fn shapley_marginal_with<M: ProbabilisticClassifier + ?Sized>(
    model: &M,
    explain: &Dataset,
    background: &Dataset,
    opts: &MarginalOptions,
) -> Result<AttributionMatrix> {
    if background.n_rows() == 0 {
        return Err(Error::Validation("background set is empty".into()));
    }
    if opts.sample_budget == 0 {
        return Err(Error::Validation("sample budget must be at least 1".into()));
    }
    let m = explain.n_columns();
    if background.n_columns() != m {
        return Err(Error::Shape {
            expected: format!("{m} background columns"),
            got: background.n_columns().to_string(),
        });
    }
    let n = explain.n_rows();
    let full = predict_proba(model, explain.x())?;
    let background_proba = predict_proba(model, background.x())?;
    let targets: Vec<usize> = match opts.policy {
        ClassPolicy::TrueLabel => explain.y().to_vec(),
        ClassPolicy::Predicted => full
            .outer_iter()
            .map(|r| argmax(r.as_slice().expect("contiguous")))
            .collect(),
    };

    let bg = background.x();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            check_deadline(opts.deadline.as_ref())?;
            let t = targets[i];
            let x = explain.x().row(i);
            let mut rng = seed::rng(seed::derive(opts.seed, &[i as u64]));
            let mut phi = vec![0.0; m];
            let mut order: Vec<usize> = (0..m).collect();
            let mut z = vec![0.0; m];
            let mut proba = vec![0.0; model.class_count()];
            for _ in 0..opts.sample_budget {
                order.shuffle(&mut rng);
                let r = rng.random_range(0..bg.nrows());
                z.iter_mut().zip(bg.row(r)).for_each(|(d, &s)| *d = s);
                let mut prev = background_proba[[r, t]];
                for &j in &order {
                    if z[j] == x[j] {
                        continue;
                    }
                    z[j] = x[j];
                    model.predict_proba_into(&z, &mut proba);
                    phi[j] += proba[t] - prev;
                    prev = proba[t];
                }
            }
            let b = opts.sample_budget as f64;
            phi.iter_mut().for_each(|v| *v /= b);
            Ok(phi)
        })
        .collect::<Result<_>>()?;

    let mut values = Array2::zeros((n, m));
    for (i, row) in rows.iter().enumerate() {
        values.row_mut(i).iter_mut().zip(row).for_each(|(d, &v)| *d = v);
    }
    let k = bg.nrows() as f64;
    Ok(AttributionMatrix {
        values,
        feature_names: explain.column_names(),
        backend: Backend::MarginalSampling,
        baseline: targets
            .iter()
            .map(|&t| background_proba.column(t).sum() / k)
            .collect(),
        prediction: (0..n).map(|i| full[[i, targets[i]]]).collect(),
        targets,
        policy: opts.policy,
        sample_budget: Some(opts.sample_budget),
        seed: opts.seed,
        dataset: explain.name().to_string(),
        model: opts.model_name.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, RawColumn};

    struct Constant;

    impl ProbabilisticClassifier for Constant {
        fn class_count(&self) -> usize {
            2
        }
        fn n_features(&self) -> usize {
            3
        }
        fn predict_proba_into(&self, _row: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&[0.3, 0.7]);
        }
    }

    fn toy(n: usize) -> Dataset {
        let cols = (0..3)
            .map(|j| RawColumn::continuous(format!("x{j}"), (0..n).map(|i| ((i + j) % 7) as f64).collect()))
            .collect();
        let labels: Vec<String> = (0..n).map(|i| (i % 2).to_string()).collect();
        Dataset::from_raw("toy", cols, &labels).unwrap()
    }

    #[test]
    fn constant_model_gets_zero_attributions() {
        let ds = toy(20);
        let attr = shapley_marginal(&Constant, &ds, &ds, 50, 1).unwrap();
        assert!(attr.values.iter().all(|&v| v == 0.0));
        assert!(attr.efficiency_gap() < 1e-15);
    }

    #[test]
    fn validates_inputs() {
        let ds = toy(20);
        let empty = ds.select_rows(&[]);
        assert!(shapley_marginal(&Constant, &ds, &empty, 10, 1).is_err());
        assert!(shapley_marginal(&Constant, &ds, &ds, 0, 1).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        struct Sum;
        impl ProbabilisticClassifier for Sum {
            fn class_count(&self) -> usize {
                2
            }
            fn n_features(&self) -> usize {
                3
            }
            fn predict_proba_into(&self, row: &[f64], out: &mut [f64]) {
                let p = 1.0 / (1.0 + (-(row[0] * row[1] - row[2])).exp());
                out.copy_from_slice(&[1.0 - p, p]);
            }
        }
        let ds = toy(12);
        let a = shapley_marginal(&Sum, &ds, &ds, 30, 5).unwrap();
        let b = shapley_marginal(&Sum, &ds, &ds, 30, 5).unwrap();
        let c = shapley_marginal(&Sum, &ds, &ds, 30, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
    }
}
