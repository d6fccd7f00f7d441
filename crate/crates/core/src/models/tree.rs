//! CART decision trees shared by the forest and boosting models.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        offset: usize,
    },
}

/// A fitted tree. Each leaf stores `leaf_width` output values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
    leaf_width: usize,
    leaf_values: Vec<f64>,
}

impl Tree {
    pub fn leaf(&self, row: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { offset } => return &self.leaf_values[*offset..*offset + self.leaf_width],
            }
        }
    }

    #[cfg(test)]
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

/// What a tree is fitted to: node statistics, their split cost and the leaf
/// output they produce.
pub(crate) trait Objective {
    type Stats: Clone;

    fn zero(&self) -> Self::Stats;
    fn add(&self, stats: &mut Self::Stats, sample: usize);
    fn remove(&self, stats: &mut Self::Stats, sample: usize);
    /// Impurity of a node, scaled by its weight, so that children costs add.
    fn cost(&self, stats: &Self::Stats) -> f64;
    fn leaf(&self, stats: &Self::Stats) -> Vec<f64>;
    fn leaf_width(&self) -> usize;
}

/// Gini impurity over weighted class counts.
pub(crate) struct Gini<'a> {
    pub labels: &'a [usize],
    pub weights: &'a [f64],
    pub class_count: usize,
}

impl Objective for Gini<'_> {
    type Stats = (Vec<f64>, f64);

    fn zero(&self) -> Self::Stats {
        (vec![0.0; self.class_count], 0.0)
    }

    fn add(&self, s: &mut Self::Stats, i: usize) {
        s.0[self.labels[i]] += self.weights[i];
        s.1 += self.weights[i];
    }

    fn remove(&self, s: &mut Self::Stats, i: usize) {
        s.0[self.labels[i]] -= self.weights[i];
        s.1 -= self.weights[i];
    }

    fn cost(&self, s: &Self::Stats) -> f64 {
        if s.1 <= 0.0 {
            return 0.0;
        }
        let sq: f64 = s.0.iter().map(|c| c * c).sum();
        s.1 - sq / s.1
    }

    fn leaf(&self, s: &Self::Stats) -> Vec<f64> {
        s.0.iter().map(|c| c / s.1).collect()
    }

    fn leaf_width(&self) -> usize {
        self.class_count
    }
}

/// Squared error on residuals; leaves emit a Newton step
/// `scale · Σ residual / Σ hessian`.
pub(crate) struct NewtonRegression<'a> {
    pub residuals: &'a [f64],
    pub hessians: &'a [f64],
    pub scale: f64,
}

impl Objective for NewtonRegression<'_> {
    /// (count, Σr, Σr², Σh)
    type Stats = (f64, f64, f64, f64);

    fn zero(&self) -> Self::Stats {
        (0.0, 0.0, 0.0, 0.0)
    }

    fn add(&self, s: &mut Self::Stats, i: usize) {
        let r = self.residuals[i];
        s.0 += 1.0;
        s.1 += r;
        s.2 += r * r;
        s.3 += self.hessians[i];
    }

    fn remove(&self, s: &mut Self::Stats, i: usize) {
        let r = self.residuals[i];
        s.0 -= 1.0;
        s.1 -= r;
        s.2 -= r * r;
        s.3 -= self.hessians[i];
    }

    fn cost(&self, s: &Self::Stats) -> f64 {
        if s.0 <= 0.0 {
            return 0.0;
        }
        (s.2 - s.1 * s.1 / s.0).max(0.0)
    }

    fn leaf(&self, s: &Self::Stats) -> Vec<f64> {
        let v = if s.3.abs() < 1e-150 { 0.0 } else { self.scale * s.1 / s.3 };
        vec![v]
    }

    fn leaf_width(&self) -> usize {
        1
    }
}

pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Number of non-constant candidate features examined per split; `None`
    /// examines all of them.
    pub max_features: Option<usize>,
}

const MIN_GAIN: f64 = 1e-12;

struct Builder<'a, O: Objective> {
    x: &'a Array2<f64>,
    objective: &'a O,
    features: &'a [usize],
    params: &'a TreeParams,
    nodes: Vec<Node>,
    leaf_values: Vec<f64>,
}

/// Fit a tree on `samples` (row indices into `x`) using only `features`.
pub(crate) fn fit<O: Objective>(
    x: &Array2<f64>,
    objective: &O,
    samples: Vec<usize>,
    features: &[usize],
    params: &TreeParams,
    rng: &mut Rng,
) -> Tree {
    let mut builder = Builder {
        x,
        objective,
        features,
        params,
        nodes: Vec::new(),
        leaf_values: Vec::new(),
    };
    builder.grow(samples, 0, rng);
    Tree {
        nodes: builder.nodes,
        leaf_width: objective.leaf_width(),
        leaf_values: builder.leaf_values,
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    cost: f64,
}

impl<O: Objective> Builder<'_, O> {
    fn grow(&mut self, samples: Vec<usize>, depth: usize, rng: &mut Rng) -> usize {
        let mut stats = self.objective.zero();
        for &i in &samples {
            self.objective.add(&mut stats, i);
        }
        let parent_cost = self.objective.cost(&stats);
        let at = self.nodes.len();

        let splittable = depth < self.params.max_depth
            && samples.len() >= self.params.min_samples_split.max(2)
            && parent_cost > MIN_GAIN;
        let best = if splittable { self.best_split(&samples, &stats, rng) } else { None };

        match best {
            Some(c) if parent_cost - c.cost > MIN_GAIN => {
                self.nodes.push(Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left: 0,
                    right: 0,
                });
                let (left, right): (Vec<usize>, Vec<usize>) =
                    samples.into_iter().partition(|&i| self.x[[i, c.feature]] <= c.threshold);
                let l = self.grow(left, depth + 1, rng);
                let r = self.grow(right, depth + 1, rng);
                if let Node::Split { left, right, .. } = &mut self.nodes[at] {
                    *left = l;
                    *right = r;
                }
            }
            _ => {
                let offset = self.leaf_values.len();
                self.leaf_values.extend(self.objective.leaf(&stats));
                self.nodes.push(Node::Leaf { offset });
            }
        }
        at
    }

    fn best_split(&self, samples: &[usize], total: &O::Stats, rng: &mut Rng) -> Option<Candidate> {
        let mut order: Vec<usize> = self.features.to_vec();
        if self.params.max_features.is_some() {
            order.shuffle(rng);
        }
        let budget = self.params.max_features.unwrap_or(usize::MAX);

        let mut best: Option<Candidate> = None;
        let mut examined = 0;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
        for &f in &order {
            if examined >= budget && best.is_some() {
                break;
            }
            sorted.clear();
            sorted.extend(samples.iter().map(|&i| (self.x[[i, f]], i)));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if sorted[0].0 == sorted[sorted.len() - 1].0 {
                continue;
            }
            examined += 1;

            let mut left = self.objective.zero();
            let mut right = total.clone();
            for k in 0..sorted.len() - 1 {
                let (v, i) = sorted[k];
                self.objective.add(&mut left, i);
                self.objective.remove(&mut right, i);
                let next = sorted[k + 1].0;
                if next <= v {
                    continue;
                }
                let cost = self.objective.cost(&left) + self.objective.cost(&right);
                if best.as_ref().is_none_or(|b| cost < b.cost) {
                    let mid = v + (next - v) / 2.0;
                    let threshold = if mid < next { mid } else { v };
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        cost,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn separable_data_gives_pure_leaves() {
        let x = Array2::from_shape_vec((6, 1), vec![1.0, 2.0, 3.0, 10.0, 11.0, 12.0]).unwrap();
        let labels = [0, 0, 0, 1, 1, 1];
        let weights = [1.0; 6];
        let gini = Gini {
            labels: &labels,
            weights: &weights,
            class_count: 2,
        };
        let params = TreeParams {
            max_depth: 5,
            min_samples_split: 2,
            max_features: None,
        };
        let tree = fit(&x, &gini, (0..6).collect(), &[0], &params, &mut seed::rng(0));
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.leaf(&[2.5]), &[1.0, 0.0]);
        assert_eq!(tree.leaf(&[6.5]), &[1.0, 0.0]);
        assert_eq!(tree.leaf(&[7.0]), &[0.0, 1.0]);
    }

    #[test]
    fn depth_is_capped() {
        let n = 64;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let weights = vec![1.0; n];
        let gini = Gini {
            labels: &labels,
            weights: &weights,
            class_count: 2,
        };
        let params = TreeParams {
            max_depth: 3,
            min_samples_split: 2,
            max_features: None,
        };
        let tree = fit(&x, &gini, (0..n).collect(), &[0], &params, &mut seed::rng(0));
        assert!(tree.depth() <= 3);
    }

    #[test]
    fn newton_leaf_is_scaled_residual_over_hessian() {
        let x = Array2::from_shape_vec((4, 1), vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let residuals = [0.5, 0.5, -0.5, -0.5];
        let hessians = [0.25; 4];
        let obj = NewtonRegression {
            residuals: &residuals,
            hessians: &hessians,
            scale: 1.0,
        };
        let params = TreeParams {
            max_depth: 1,
            min_samples_split: 2,
            max_features: None,
        };
        let tree = fit(&x, &obj, (0..4).collect(), &[0], &params, &mut seed::rng(0));
        assert_eq!(tree.leaf(&[0.0]), &[2.0]);
        assert_eq!(tree.leaf(&[1.0]), &[-2.0]);
    }
}
