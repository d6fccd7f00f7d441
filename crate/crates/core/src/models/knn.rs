//! k-nearest neighbours with Euclidean distance on raw feature values.
//! Probabilities are neighbour vote fractions; equal distances are broken
//! toward the lower training-row index.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct KnnModel {
    columns: Vec<usize>,
    /// Training rows restricted to `columns`, row-major.
    points: Vec<f64>,
    labels: Vec<usize>,
    k: usize,
    class_count: usize,
}

pub(crate) fn fit(cfg: &KnnConfig, x: &Array2<f64>, y: &[usize], class_count: usize, active: &[usize]) -> KnnModel {
    let mut points = Vec::with_capacity(x.nrows() * active.len());
    for row in x.outer_iter() {
        points.extend(active.iter().map(|&j| row[j]));
    }
    KnnModel {
        columns: active.to_vec(),
        points,
        labels: y.to_vec(),
        k: cfg.k.clamp(1, y.len()),
        class_count,
    }
}

impl KnnModel {
    pub fn predict_into(&self, row: &[f64], out: &mut [f64]) {
        let w = self.columns.len();
        let query: Vec<f64> = self.columns.iter().map(|&j| row[j]).collect();
        let mut dist: Vec<(f64, usize)> = self
            .points
            .chunks_exact(w)
            .enumerate()
            .map(|(i, p)| {
                let d: f64 = p.iter().zip(&query).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, order);
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(_, i) in &dist[..self.k] {
            out[self.labels[i]] += 1.0;
        }
        let k = self.k as f64;
        out.iter_mut().for_each(|v| *v /= k);
        debug_assert_eq!(out.len(), self.class_count);
    }
}
