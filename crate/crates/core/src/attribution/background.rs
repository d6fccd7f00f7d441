//! k-means summarization of a training set into background rows.

use ndarray::Array2;
use rand::Rng as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

const MAX_ITERATIONS: usize = 100;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, ties toward the lower centroid index.
fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(row, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Summarize `train` into `k` centroid rows with Lloyd's algorithm from a
/// k-means++ start. Indicator columns are rounded back to {0, 1}; each
/// centroid is labeled with the majority class of its members.
pub fn summarize_background(train: &Dataset, k: usize, seed: u64) -> Result<Dataset> {
    let n = train.n_rows();
    if k == 0 || k > n {
        return Err(Error::Bounds(format!("background size {k} outside [1, {n}]")));
    }
    let rows: Vec<Vec<f64>> = train.x().outer_iter().map(|r| r.to_vec()).collect();
    let mut rng = seed::rng(seed);

    // k-means++ seeding over distinct row indices.
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![rows[first].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = (0..n).filter(|&i| !chosen[i]).map(|i| d2[i]).sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for i in (0..n).filter(|&i| !chosen[i]) {
                if d2[i] > 0.0 {
                    pick = Some(i);
                    target -= d2[i];
                    if target <= 0.0 {
                        break;
                    }
                }
            }
            pick.expect("positive total implies a candidate")
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.push(rows[pick].clone());
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &rows[pick]));
        }
    }

    let m = train.n_columns();
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        let mut dist = vec![0.0; n];
        for (i, r) in rows.iter().enumerate() {
            let (c, d) = nearest(r, &centroids);
            dist[i] = d;
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; m]; k];
        let mut counts = vec![0usize; k];
        for (i, r) in rows.iter().enumerate() {
            counts[assignment[i]] += 1;
            sums[assignment[i]].iter_mut().zip(r).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                continue;
            }
            // Empty cluster: move it to the point farthest from its centroid,
            // or keep it where it is when every point sits on a centroid.
            let far = (0..n).fold(0, |best, i| if dist[i] > dist[best] { i } else { best });
            if dist[far] > 0.0 {
                centroids[c] = rows[far].clone();
                dist[far] = 0.0;
            }
        }
    }

    let class_count = train.class_count();
    let mut votes = vec![vec![0usize; class_count]; k];
    for (i, &c) in assignment.iter().enumerate() {
        votes[c][train.y()[i]] += 1;
    }
    let labels: Vec<usize> = votes
        .iter()
        .map(|v| (0..class_count).fold(0, |b, c| if v[c] > v[b] { c } else { b }))
        .collect();

    let mut x = Array2::zeros((k, m));
    for (c, centroid) in centroids.iter().enumerate() {
        for (j, &v) in centroid.iter().enumerate() {
            x[[c, j]] = if train.is_indicator(j) {
                if v >= 0.5 {
                    1.0
                } else {
                    0.0
                }
            } else {
                v
            };
        }
    }
    train.with_rows(format!("{}-kmeans{k}", train.name()), x, labels)
}

/// Within-cluster sum of squared distances of `rows` to their nearest centroid.
#[cfg(test)]
pub(crate) fn sse(data: &Array2<f64>, centroids: &Array2<f64>) -> f64 {
    let cs: Vec<Vec<f64>> = centroids.outer_iter().map(|r| r.to_vec()).collect();
    data.outer_iter().map(|r| nearest(r.as_slice().expect("contiguous"), &cs).1).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{iris, synth_fraud};
    use rand::seq::index;

    fn sorted_rows(x: &Array2<f64>) -> Vec<Vec<u64>> {
        let mut rows: Vec<Vec<u64>> = x.outer_iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
        rows.sort();
        rows
    }

    #[test]
    fn k_equals_n_returns_the_training_rows() {
        let ds = iris();
        let bg = summarize_background(&ds, ds.n_rows(), 3).unwrap();
        assert_eq!(sorted_rows(bg.x()), sorted_rows(ds.x()));
    }

    #[test]
    fn one_cluster_is_the_column_mean() {
        let ds = iris();
        let bg = summarize_background(&ds, 1, 3).unwrap();
        for j in 0..ds.n_columns() {
            let mean = ds.x().column(j).sum() / ds.n_rows() as f64;
            assert!((bg.x()[[0, j]] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn indicator_columns_are_rounded() {
        let ds = synth_fraud(300, 0.5, 1).unwrap();
        let bg = summarize_background(&ds, 1, 0).unwrap();
        for j in 0..ds.n_columns() {
            if ds.is_indicator(j) {
                let v = bg.x()[[0, j]];
                assert!(v == 0.0 || v == 1.0);
            }
        }
    }

    #[test]
    fn ten_centroids_beat_ten_random_rows() {
        let ds = iris();
        let bg = summarize_background(&ds, 10, 3).unwrap();
        let ours = sse(ds.x(), bg.x());
        for s in 0..5 {
            let rows = index::sample(&mut seed::rng(s), ds.n_rows(), 10).into_vec();
            let random = ds.select_rows(&rows);
            assert!(ours <= sse(ds.x(), random.x()), "seed {s}");
        }
    }

    #[test]
    fn bounds() {
        let ds = iris();
        assert!(summarize_background(&ds, 0, 0).is_err());
        assert!(summarize_background(&ds, 151, 0).is_err());
    }
}
