use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Per-column affine map `(x - mean) / scale` over the active columns,
/// fitted on training data. Constant columns get scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Standardizer {
    pub columns: Vec<usize>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>, columns: &[usize]) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(columns.len());
        let mut scale = Vec::with_capacity(columns.len());
        for &j in columns {
            let col = x.column(j);
            let mu = col.sum() / n;
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(mu);
            scale.push(if sd > 1e-12 { sd } else { 1.0 });
        }
        Self {
            columns: columns.to_vec(),
            mean,
            scale,
        }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn apply_into(&self, row: &[f64], out: &mut [f64]) {
        for (k, &j) in self.columns.iter().enumerate() {
            out[k] = (row[j] - self.mean[k]) / self.scale[k];
        }
    }

    /// Standardized copy of the active columns of `x`, row-major `n × width`.
    pub fn transform(&self, x: &Array2<f64>) -> Vec<f64> {
        let w = self.width();
        let mut out = vec![0.0; x.nrows() * w];
        for (i, row) in x.outer_iter().enumerate() {
            for (k, &j) in self.columns.iter().enumerate() {
                out[i * w + k] = (row[j] - self.mean[k]) / self.scale[k];
            }
        }
        out
    }
}
