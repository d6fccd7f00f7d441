//! Multinomial logistic regression trained by full-batch gradient descent
//! with Armijo backtracking.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use super::{softmax, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitConfig {
    /// L2 penalty on the weights (not the intercepts).
    pub l2: f64,
    pub iterations: usize,
    /// Initial step of every backtracking line search.
    pub step: f64,
    /// Gradient-norm threshold for declaring convergence.
    pub tolerance: f64,
}

impl Default for LogitConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            iterations: 500,
            step: 0.1,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct LogitModel {
    scaler: Standardizer,
    /// `C × k`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LogitModel {
    fn logits(&self, z: &[f64], out: &mut [f64]) {
        let k = self.scaler.width();
        for (c, o) in out.iter_mut().enumerate() {
            let w = &self.weights[c * k..(c + 1) * k];
            *o = self.bias[c] + w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn predict_into(&self, row: &[f64], out: &mut [f64]) {
        let mut z = vec![0.0; self.scaler.width()];
        self.scaler.apply_into(row, &mut z);
        self.logits(&z, out);
        softmax(out);
    }
}

struct Problem<'a> {
    z: &'a [f64],
    y: &'a [usize],
    n: usize,
    k: usize,
    c: usize,
    l2: f64,
}

impl Problem<'_> {
    /// Penalized mean cross-entropy; fills `grad` (weights then biases) when given.
    fn loss(&self, params: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let (k, c) = (self.k, self.c);
        let (w, b) = params.split_at(c * k);
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut p = vec![0.0; c];
        let mut total = 0.0;
        for i in 0..self.n {
            let zi = &self.z[i * k..(i + 1) * k];
            for (cls, pc) in p.iter_mut().enumerate() {
                *pc = b[cls] + w[cls * k..(cls + 1) * k].iter().zip(zi).map(|(a, v)| a * v).sum::<f64>();
            }
            softmax(&mut p);
            total -= p[self.y[i]].max(1e-300).ln();
            if let Some(g) = grad.as_deref_mut() {
                for cls in 0..c {
                    let d = p[cls] - if cls == self.y[i] { 1.0 } else { 0.0 };
                    for (gv, v) in g[cls * k..(cls + 1) * k].iter_mut().zip(zi) {
                        *gv += d * v;
                    }
                    g[c * k + cls] += d;
                }
            }
        }
        let n = self.n as f64;
        let penalty = 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v /= n);
            for (gv, wv) in g[..c * k].iter_mut().zip(w) {
                *gv += self.l2 * wv;
            }
        }
        total / n + penalty
    }
}

pub(crate) fn fit(
    cfg: &LogitConfig,
    x: &Array2<f64>,
    y: &[usize],
    class_count: usize,
    active: &[usize],
) -> (LogitModel, TrainReport) {
    let scaler = Standardizer::fit(x, active);
    let z = scaler.transform(x);
    let k = scaler.width();
    let problem = Problem {
        z: &z,
        y,
        n: y.len(),
        k,
        c: class_count,
        l2: cfg.l2,
    };

    let dim = class_count * (k + 1);
    let mut params = vec![0.0; dim];
    // Intercepts start at the log class frequencies, so columns without
    // signal leave the prior untouched.
    let mut counts = vec![0usize; class_count];
    y.iter().for_each(|&c| counts[c] += 1);
    for (b, &count) in params[class_count * k..].iter_mut().zip(&counts) {
        *b = (count.max(1) as f64 / y.len() as f64).ln();
    }
    let mut grad = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    let mut loss = problem.loss(&params, Some(&mut grad));
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.iterations {
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() < cfg.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut step = cfg.step;
        loop {
            for ((t, p), g) in trial.iter_mut().zip(&params).zip(&grad) {
                *t = p - step * g;
            }
            let candidate = problem.loss(&trial, None);
            if candidate <= loss - 1e-4 * step * gnorm2 || step < 1e-12 {
                break;
            }
            step *= 0.5;
        }
        std::mem::swap(&mut params, &mut trial);
        loss = problem.loss(&params, Some(&mut grad));
    }

    let bias = params.split_off(class_count * k);
    (
        LogitModel {
            scaler,
            weights: params,
            bias,
        },
        TrainReport {
            converged,
            iterations,
            final_loss: Some(loss),
        },
    )
}
