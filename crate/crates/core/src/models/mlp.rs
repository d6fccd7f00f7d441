//! One-hidden-layer ReLU perceptron with a softmax output, trained by
//! minibatch Adam on standardized inputs.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use super::{softmax, TrainReport};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub step: f64,
    pub l2: f64,
    pub batch_size: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            epochs: 300,
            step: 0.01,
            l2: 1e-4,
            batch_size: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct MlpModel {
    scaler: Standardizer,
    hidden: usize,
    classes: usize,
    /// Parameters packed as `w1 (h×k) | b1 (h) | w2 (C×h) | b2 (C)`.
    params: Vec<f64>,
}

struct Layout {
    k: usize,
    h: usize,
    c: usize,
}

impl Layout {
    fn w1(&self) -> std::ops::Range<usize> {
        0..self.h * self.k
    }
    fn b1(&self) -> std::ops::Range<usize> {
        let s = self.h * self.k;
        s..s + self.h
    }
    fn w2(&self) -> std::ops::Range<usize> {
        let s = self.h * self.k + self.h;
        s..s + self.c * self.h
    }
    fn b2(&self) -> std::ops::Range<usize> {
        let s = self.h * self.k + self.h + self.c * self.h;
        s..s + self.c
    }
    fn len(&self) -> usize {
        self.b2().end
    }

    fn forward(&self, params: &[f64], z: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        let w1 = &params[self.w1()];
        let b1 = &params[self.b1()];
        for (u, hv) in hidden.iter_mut().enumerate() {
            let a = b1[u] + w1[u * self.k..(u + 1) * self.k].iter().zip(z).map(|(w, v)| w * v).sum::<f64>();
            *hv = a.max(0.0);
        }
        let w2 = &params[self.w2()];
        let b2 = &params[self.b2()];
        for (c, o) in out.iter_mut().enumerate() {
            *o = b2[c] + w2[c * self.h..(c + 1) * self.h].iter().zip(hidden.iter()).map(|(w, v)| w * v).sum::<f64>();
        }
        softmax(out);
    }
}

impl MlpModel {
    fn layout(&self) -> Layout {
        Layout {
            k: self.scaler.width(),
            h: self.hidden,
            c: self.classes,
        }
    }

    pub fn predict_into(&self, row: &[f64], out: &mut [f64]) {
        let layout = self.layout();
        let mut z = vec![0.0; layout.k];
        self.scaler.apply_into(row, &mut z);
        let mut hidden = vec![0.0; layout.h];
        layout.forward(&self.params, &z, &mut hidden, out);
    }
}

pub(crate) fn fit(
    cfg: &MlpConfig,
    x: &Array2<f64>,
    y: &[usize],
    class_count: usize,
    active: &[usize],
    seed: u64,
) -> (MlpModel, TrainReport) {
    let scaler = Standardizer::fit(x, active);
    let z = scaler.transform(x);
    let layout = Layout {
        k: scaler.width(),
        h: cfg.hidden,
        c: class_count,
    };
    let n = y.len();
    let mut rng = seed::rng(seed);

    // Glorot-uniform weights, zero biases.
    let mut params = vec![0.0; layout.len()];
    let bound1 = (6.0 / (layout.k + layout.h) as f64).sqrt();
    for w in &mut params[layout.w1()] {
        *w = rng.random_range(-bound1..bound1);
    }
    let bound2 = (6.0 / (layout.h + layout.c) as f64).sqrt();
    for w in &mut params[layout.w2()] {
        *w = rng.random_range(-bound2..bound2);
    }

    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut m1 = vec![0.0; params.len()];
    let mut m2 = vec![0.0; params.len()];
    let mut grad = vec![0.0; params.len()];
    let mut hidden = vec![0.0; layout.h];
    let mut out = vec![0.0; layout.c];
    let mut delta_hidden = vec![0.0; layout.h];
    let mut order: Vec<usize> = (0..n).collect();
    let batch = cfg.batch_size.clamp(1, n);
    let mut t = 0i32;
    let mut epoch_loss = f64::NAN;

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                let zi = &z[i * layout.k..(i + 1) * layout.k];
                layout.forward(&params, zi, &mut hidden, &mut out);
                epoch_loss -= out[y[i]].max(1e-300).ln();
                out[y[i]] -= 1.0;
                // Output layer.
                delta_hidden.iter_mut().for_each(|d| *d = 0.0);
                let w2_start = layout.w2().start;
                let b2_start = layout.b2().start;
                for c in 0..layout.c {
                    let d = out[c];
                    for u in 0..layout.h {
                        grad[w2_start + c * layout.h + u] += d * hidden[u];
                        delta_hidden[u] += d * params[w2_start + c * layout.h + u];
                    }
                    grad[b2_start + c] += d;
                }
                // Hidden layer.
                let b1_start = layout.b1().start;
                for u in 0..layout.h {
                    if hidden[u] <= 0.0 {
                        continue;
                    }
                    let d = delta_hidden[u];
                    for (g, v) in grad[u * layout.k..(u + 1) * layout.k].iter_mut().zip(zi) {
                        *g += d * v;
                    }
                    grad[b1_start + u] += d;
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            for r in [layout.w1(), layout.w2()] {
                for idx in r {
                    grad[idx] += cfg.l2 * params[idx];
                }
            }

            t += 1;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            for ((p, g), (a, b)) in params.iter_mut().zip(&grad).zip(m1.iter_mut().zip(m2.iter_mut())) {
                *a = beta1 * *a + (1.0 - beta1) * g;
                *b = beta2 * *b + (1.0 - beta2) * g * g;
                *p -= cfg.step * (*a / c1) / ((*b / c2).sqrt() + eps);
            }
        }
        epoch_loss /= n as f64;
    }

    (
        MlpModel {
            scaler,
            hidden: cfg.hidden,
            classes: class_count,
            params,
        },
        TrainReport {
            converged: epoch_loss.is_finite(),
            iterations: cfg.epochs,
            final_loss: Some(epoch_loss),
        },
    )
}

#[cfg(test)]
mod tests {
    use crate::data::{iris, split};
    use crate::metrics::{evaluate, MetricKind};
    use crate::models::{train_full, ModelKind};

    #[test]
    fn iris_accuracy() {
        let s = split(&iris(), 0.2, 7).unwrap();
        let model = train_full(&"mlp".parse::<ModelKind>().unwrap(), &s.train, 3).unwrap();
        let pred = model.predict_labels(s.test.x()).unwrap();
        let acc = evaluate(s.test.y(), &pred, 3, MetricKind::accuracy()).unwrap().value;
        assert!(acc >= 0.9, "accuracy {acc}");
        assert!(model.report().converged);
    }
}
