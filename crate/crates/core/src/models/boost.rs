//! Gradient-boosted depth-limited regression trees on the multinomial
//! deviance. Two-class problems fit a single logit per stage; C > 2 classes
//! fit one tree per class per stage with a softmax link.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::tree::{self, NewtonRegression, Tree, TreeParams};
use super::{softmax, TrainReport};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub stages: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            stages: 100,
            max_depth: 3,
            learning_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct BoostModel {
    class_count: usize,
    init: Vec<f64>,
    learning_rate: f64,
    /// `stages × outputs` trees, stage-major.
    trees: Vec<Tree>,
}

impl BoostModel {
    fn outputs(&self) -> usize {
        if self.class_count == 2 {
            1
        } else {
            self.class_count
        }
    }

    fn raw(&self, row: &[f64], raw: &mut [f64]) {
        raw.copy_from_slice(&self.init);
        let k = self.outputs();
        for (t, tree) in self.trees.iter().enumerate() {
            raw[t % k] += self.learning_rate * tree.leaf(row)[0];
        }
    }

    pub fn predict_into(&self, row: &[f64], out: &mut [f64]) {
        if self.class_count == 2 {
            let mut f = [0.0];
            self.raw(row, &mut f);
            let p1 = 1.0 / (1.0 + (-f[0]).exp());
            out[0] = 1.0 - p1;
            out[1] = p1;
        } else {
            self.raw(row, out);
            softmax(out);
        }
    }
}

pub(crate) fn fit(
    cfg: &BoostConfig,
    x: &Array2<f64>,
    y: &[usize],
    class_count: usize,
    active: &[usize],
) -> (BoostModel, TrainReport) {
    let n = y.len();
    let mut prior = vec![0.0; class_count];
    for &l in y {
        prior[l] += 1.0 / n as f64;
    }
    let binary = class_count == 2;
    let init: Vec<f64> = if binary {
        vec![(prior[1] / prior[0]).ln()]
    } else {
        prior.iter().map(|p| p.ln()).collect()
    };
    let k = init.len();
    let factor = if binary { 1.0 } else { (class_count as f64 - 1.0) / class_count as f64 };
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_samples_split: 2,
        max_features: None,
    };
    // Unused by trees that examine every feature.
    let mut rng = seed::rng(0);

    let mut raw: Vec<Vec<f64>> = vec![init.clone(); n];
    let mut trees = Vec::with_capacity(cfg.stages * k);
    let mut p = vec![0.0; class_count];
    let mut residuals = vec![vec![0.0; n]; k];
    let mut hessians = vec![vec![0.0; n]; k];
    for _ in 0..cfg.stages {
        for i in 0..n {
            if binary {
                let p1 = 1.0 / (1.0 + (-raw[i][0]).exp());
                let t = if y[i] == 1 { 1.0 } else { 0.0 };
                residuals[0][i] = t - p1;
                hessians[0][i] = p1 * (1.0 - p1);
            } else {
                p.copy_from_slice(&raw[i]);
                softmax(&mut p);
                for c in 0..k {
                    let t = if y[i] == c { 1.0 } else { 0.0 };
                    residuals[c][i] = t - p[c];
                    hessians[c][i] = p[c] * (1.0 - p[c]);
                }
            }
        }
        for c in 0..k {
            let objective = NewtonRegression {
                residuals: &residuals[c],
                hessians: &hessians[c],
                scale: factor,
            };
            let tree = tree::fit(x, &objective, (0..n).collect(), active, &params, &mut rng);
            for (i, r) in raw.iter_mut().enumerate() {
                r[c] += cfg.learning_rate * tree.leaf(x.row(i).as_slice().expect("standard layout"))[0];
            }
            trees.push(tree);
        }
    }

    let mut loss = 0.0;
    for i in 0..n {
        let pi = if binary {
            let p1 = 1.0 / (1.0 + (-raw[i][0]).exp());
            if y[i] == 1 {
                p1
            } else {
                1.0 - p1
            }
        } else {
            p.copy_from_slice(&raw[i]);
            softmax(&mut p);
            p[y[i]]
        };
        loss -= pi.max(1e-300).ln();
    }
    let loss = loss / n as f64;

    (
        BoostModel {
            class_count,
            init,
            learning_rate: cfg.learning_rate,
            trees,
        },
        TrainReport {
            converged: loss.is_finite(),
            iterations: cfg.stages,
            final_loss: Some(loss),
        },
    )
}

#[cfg(test)]
mod tests {
    use crate::data::{breast_cancer, iris, split};
    use crate::metrics::{evaluate, MetricKind};
    use crate::models::{train_full, ModelKind};

    fn accuracy(ds: crate::data::Dataset) -> f64 {
        let s = split(&ds, 0.2, 7).unwrap();
        let model = train_full(&"gbc".parse::<ModelKind>().unwrap(), &s.train, 1).unwrap();
        let pred = model.predict_labels(s.test.x()).unwrap();
        evaluate(s.test.y(), &pred, s.test.class_count(), MetricKind::accuracy())
            .unwrap()
            .value
    }

    #[test]
    fn multiclass_and_binary_accuracy() {
        assert!(accuracy(iris()) >= 0.9);
        assert!(accuracy(breast_cancer()) >= 0.9);
    }
}
