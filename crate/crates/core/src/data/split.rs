use rand::seq::{index, SliceRandom};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Shuffle all rows, then cut.
    #[default]
    Shuffle,
    /// Shuffle within each class and cut each class separately.
    Stratified,
}

/// A train/test partition of a parent dataset.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: Dataset,
    pub test: Dataset,
    /// Parent row indices of `train`, in partition order.
    pub train_indices: Vec<usize>,
    /// Parent row indices of `test`, in partition order.
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

impl DataSplit {
    /// A split whose test partition is cut to at most `limit` rows.
    pub fn with_test_limit(&self, limit: usize) -> DataSplit {
        if self.test.n_rows() <= limit {
            return self.clone();
        }
        let rows: Vec<usize> = (0..limit).collect();
        DataSplit {
            train: self.train.clone(),
            test: self.test.select_rows(&rows),
            train_indices: self.train_indices.clone(),
            test_indices: self.test_indices[..limit].to_vec(),
            seed: self.seed,
            test_fraction: self.test_fraction,
        }
    }
}

/// Test partition size: `round(n * test_fraction)`, at least one row.
fn test_size(n: usize, test_fraction: f64) -> usize {
    ((n as f64 * test_fraction).round() as usize).max(1)
}

/// Shuffle and partition with [`SplitMode::Shuffle`].
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<DataSplit> {
    split_with(ds, test_fraction, seed, SplitMode::Shuffle)
}

pub fn split_with(ds: &Dataset, test_fraction: f64, seed: u64, mode: SplitMode) -> Result<DataSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Bounds(format!("test_fraction {test_fraction} outside (0, 1)")));
    }
    let n = ds.n_rows();
    let mut rng = seed::rng(seed);
    let (train_indices, test_indices) = match mode {
        SplitMode::Shuffle => {
            let n_test = test_size(n, test_fraction);
            if n_test >= n {
                return Err(Error::Bounds(format!(
                    "{n} rows cannot yield nonempty partitions at test_fraction {test_fraction}"
                )));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let test = idx.split_off(n - n_test);
            (idx, test)
        }
        SplitMode::Stratified => {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for class in 0..ds.class_count() {
                let mut rows: Vec<usize> = (0..n).filter(|&i| ds.y()[i] == class).collect();
                rows.shuffle(&mut rng);
                let k = rows.len();
                let n_test = ((k as f64 * test_fraction).round() as usize).min(k.saturating_sub(1));
                test.extend(rows.split_off(k - n_test));
                train.extend(rows);
            }
            if test.is_empty() || train.is_empty() {
                return Err(Error::Bounds(format!(
                    "{n} rows cannot yield nonempty stratified partitions at test_fraction {test_fraction}"
                )));
            }
            train.shuffle(&mut rng);
            test.shuffle(&mut rng);
            (train, test)
        }
    };

    let train = ds.select_rows(&train_indices);
    if let Some(class) = train.missing_class() {
        return Err(Error::Stratification { class, seed });
    }
    let test = ds.select_rows(&test_indices);
    Ok(DataSplit {
        train,
        test,
        train_indices,
        test_indices,
        seed,
        test_fraction,
    })
}

/// Uniform row subset of `size` rows without replacement.
pub fn subsample(ds: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    let n = ds.n_rows();
    if size == 0 || size > n {
        return Err(Error::Bounds(format!("subsample size {size} outside [1, {n}]")));
    }
    let mut rng = seed::rng(seed);
    let rows = index::sample(&mut rng, n, size).into_vec();
    let sub = ds.select_rows(&rows);
    if let Some(class) = sub.missing_class() {
        return Err(Error::Stratification { class, seed });
    }
    Ok(sub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{iris, Dataset, RawColumn};
    use std::collections::BTreeSet;

    fn tiny(n: usize) -> Dataset {
        let labels: Vec<String> = (0..n).map(|i| (i % 2).to_string()).collect();
        Dataset::from_raw("tiny", vec![RawColumn::continuous("a", (0..n).map(|i| i as f64).collect())], &labels)
            .unwrap()
    }

    #[test]
    fn iris_split_sizes() {
        let s = split(&iris(), 0.2, 7).unwrap();
        assert_eq!(s.train.n_rows(), 120);
        assert_eq!(s.test.n_rows(), 30);
    }

    #[test]
    fn five_rows_give_four_and_one() {
        let s = split(&tiny(5), 0.2, 3).unwrap();
        assert_eq!((s.train.n_rows(), s.test.n_rows()), (4, 1));
    }

    #[test]
    fn split_is_a_deterministic_partition() {
        let ds = iris();
        let a = split(&ds, 0.2, 7).unwrap();
        let b = split(&ds, 0.2, 7).unwrap();
        assert_eq!(a.train_indices, b.train_indices);
        assert_eq!(a.test_indices, b.test_indices);
        let train: BTreeSet<_> = a.train_indices.iter().copied().collect();
        let test: BTreeSet<_> = a.test_indices.iter().copied().collect();
        assert!(train.is_disjoint(&test));
        assert_eq!(train.len() + test.len(), ds.n_rows());
    }

    #[test]
    fn fraction_bounds() {
        assert!(split(&iris(), 0.0, 1).is_err());
        assert!(split(&iris(), 1.0, 1).is_err());
    }

    #[test]
    fn absent_training_class_is_a_stratification_error() {
        // Two rows of class 1 out of four; a 50% test cut sometimes removes both.
        let labels: Vec<String> = ["0", "0", "1", "1"].iter().map(|s| s.to_string()).collect();
        let ds = Dataset::from_raw("t", vec![RawColumn::continuous("a", vec![0., 1., 2., 3.])], &labels).unwrap();
        let outcomes: Vec<_> = (0..64).map(|seed| split(&ds, 0.5, seed)).collect();
        assert!(outcomes.iter().any(|r| matches!(r, Err(Error::Stratification { .. }))));
        assert!(outcomes.iter().any(|r| r.is_ok()));
        for seed in 0..64 {
            let s = split_with(&ds, 0.5, seed, SplitMode::Stratified).unwrap();
            assert!(s.train.missing_class().is_none());
        }
    }

    #[test]
    fn stratified_keeps_class_proportions() {
        let s = split_with(&iris(), 0.2, 11, SplitMode::Stratified).unwrap();
        assert_eq!(s.test.class_counts(), vec![10, 10, 10]);
        assert_eq!(s.train.class_counts(), vec![40, 40, 40]);
    }

    #[test]
    fn subsample_full_size_is_a_permutation() {
        let ds = iris();
        let sub = subsample(&ds, ds.n_rows(), 5).unwrap();
        let mut a: Vec<String> = ds.x().rows().into_iter().map(|r| format!("{r:?}")).collect();
        let mut b: Vec<String> = sub.x().rows().into_iter().map(|r| format!("{r:?}")).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn subsample_bounds_and_seeds() {
        let ds = iris();
        assert!(matches!(subsample(&ds, 151, 0), Err(Error::Bounds(_))));
        assert!(matches!(subsample(&ds, 0, 0), Err(Error::Bounds(_))));
        let a = subsample(&ds, 60, 1).unwrap();
        let b = subsample(&ds, 60, 2).unwrap();
        assert_ne!(a.x(), b.x());
    }

    #[test]
    fn test_limit_truncates_only_the_test_partition() {
        let s = split(&iris(), 0.2, 7).unwrap();
        let t = s.with_test_limit(10);
        assert_eq!(t.test.n_rows(), 10);
        assert_eq!(t.train.n_rows(), 120);
        assert_eq!(t.test_indices[..], s.test_indices[..10]);
    }
}
