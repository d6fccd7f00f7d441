//! Random forest of Gini CART trees with per-tree bootstrap resampling and
//! √k feature subsampling at every split.

use ndarray::Array2;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{self, Gini, Tree, TreeParams};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: 8,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct ForestModel {
    trees: Vec<Tree>,
}

pub(crate) fn fit(
    cfg: &ForestConfig,
    x: &Array2<f64>,
    y: &[usize],
    class_count: usize,
    active: &[usize],
    seed: u64,
) -> ForestModel {
    let n = y.len();
    let max_features = ((active.len() as f64).sqrt() as usize).max(1);
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_samples_split: cfg.min_samples_split,
        max_features: Some(max_features),
    };
    let trees = (0..cfg.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(seed, &[t as u64]));
            let mut counts = vec![0.0; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1.0;
            }
            let samples: Vec<usize> = (0..n).filter(|&i| counts[i] > 0.0).collect();
            let gini = Gini {
                labels: y,
                weights: &counts,
                class_count,
            };
            tree::fit(x, &gini, samples, active, &params, &mut rng)
        })
        .collect();
    ForestModel { trees }
}

impl ForestModel {
    pub fn predict_into(&self, row: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for tree in &self.trees {
            for (o, v) in out.iter_mut().zip(tree.leaf(row)) {
                *o += v;
            }
        }
        let t = self.trees.len() as f64;
        out.iter_mut().for_each(|v| *v /= t);
    }
}
