//! Classification metrics: accuracy, precision, recall and F1 with binary,
//! macro, weighted or micro averaging.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-vs-rest confusion counts per class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: Vec<usize>,
    pub fp: Vec<usize>,
    pub fn_: Vec<usize>,
    pub tn: Vec<usize>,
    /// Number of true instances per class.
    pub support: Vec<usize>,
    /// Number of rows whose prediction matches the truth.
    pub correct: usize,
    pub n: usize,
}

impl ConfusionCounts {
    pub fn class_count(&self) -> usize {
        self.tp.len()
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], class_count: usize) -> Result<ConfusionCounts> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape {
            expected: format!("{} predictions", y_true.len()),
            got: y_pred.len().to_string(),
        });
    }
    let n = y_true.len();
    let mut tp = vec![0; class_count];
    let mut fp = vec![0; class_count];
    let mut fn_ = vec![0; class_count];
    let mut support = vec![0; class_count];
    let mut correct = 0;
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= class_count || p >= class_count {
            return Err(Error::Bounds(format!("label outside [0, {class_count})")));
        }
        support[t] += 1;
        if t == p {
            tp[t] += 1;
            correct += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let tn = (0..class_count).map(|c| n - tp[c] - fp[c] - fn_[c]).collect();
    Ok(ConfusionCounts {
        tp,
        fp,
        fn_,
        tn,
        support,
        correct,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
    F1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Average {
    /// Score of class 1 only; valid for two classes.
    Binary,
    /// Unweighted mean over classes.
    Macro,
    /// Support-weighted mean over classes.
    #[default]
    Weighted,
    /// Pooled counts over classes.
    Micro,
}

/// A metric together with its multiclass averaging rule. Averaging is
/// ignored for accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetricKind {
    pub metric: Metric,
    pub average: Average,
}

impl MetricKind {
    pub const fn new(metric: Metric, average: Average) -> Self {
        Self { metric, average }
    }

    pub const fn accuracy() -> Self {
        Self::new(Metric::Accuracy, Average::Weighted)
    }

    /// Short label such as `accuracy` or `f1-macro`.
    pub fn label(&self) -> String {
        match (self.metric, self.average) {
            (Metric::Accuracy, _) | (_, Average::Weighted) => self.metric.to_string(),
            (m, a) => format!("{m}-{a}"),
        }
    }
}

/// A metric value plus a flag recording whether any class hit a zero
/// denominator (and was scored 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub zero_division: bool,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn f1_of(p: f64, r: f64) -> (f64, bool) {
    if p + r == 0.0 {
        (0.0, true)
    } else {
        (2.0 * p * r / (p + r), false)
    }
}

/// Per-class precision, recall and F1 with their zero-division flags.
fn per_class(counts: &ConfusionCounts, c: usize) -> [(f64, bool); 3] {
    let p = ratio(counts.tp[c], counts.tp[c] + counts.fp[c]);
    let r = ratio(counts.tp[c], counts.tp[c] + counts.fn_[c]);
    let f = f1_of(p.0, r.0);
    [p, r, (f.0, f.1 || p.1 || r.1)]
}

pub fn score(counts: &ConfusionCounts, kind: MetricKind) -> Result<Score> {
    let c = counts.class_count();
    if counts.n == 0 {
        return Ok(Score {
            value: 0.0,
            zero_division: true,
        });
    }
    let slot = match kind.metric {
        Metric::Accuracy => {
            return Ok(Score {
                value: counts.correct as f64 / counts.n as f64,
                zero_division: false,
            })
        }
        Metric::Precision => 0,
        Metric::Recall => 1,
        Metric::F1 => 2,
    };
    let (value, zero_division) = match kind.average {
        Average::Binary => {
            if c != 2 {
                return Err(Error::Config(format!("binary averaging needs 2 classes, got {c}")));
            }
            per_class(counts, 1)[slot]
        }
        Average::Macro => {
            let mut flag = false;
            let sum: f64 = (0..c)
                .map(|k| {
                    let (v, f) = per_class(counts, k)[slot];
                    flag |= f;
                    v
                })
                .sum();
            (sum / c as f64, flag)
        }
        Average::Weighted => {
            let mut flag = false;
            let sum: f64 = (0..c)
                .filter(|&k| counts.support[k] > 0)
                .map(|k| {
                    let (v, f) = per_class(counts, k)[slot];
                    flag |= f;
                    v * counts.support[k] as f64
                })
                .sum();
            (sum / counts.n as f64, flag)
        }
        Average::Micro => {
            let tp: usize = counts.tp.iter().sum();
            let fp: usize = counts.fp.iter().sum();
            let fn_: usize = counts.fn_.iter().sum();
            let p = ratio(tp, tp + fp);
            let r = ratio(tp, tp + fn_);
            match kind.metric {
                Metric::Precision => p,
                Metric::Recall => r,
                _ => f1_of(p.0, r.0),
            }
        }
    };
    Ok(Score {
        value,
        zero_division,
    })
}

/// Confusion plus score in one call.
pub fn evaluate(y_true: &[usize], y_pred: &[usize], class_count: usize, kind: MetricKind) -> Result<Score> {
    score(&confusion(y_true, y_pred, class_count)?, kind)
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
        })
    }
}

impl fmt::Display for Average {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Average::Binary => "binary",
            Average::Macro => "macro",
            Average::Weighted => "weighted",
            Average::Micro => "micro",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "accuracy" | "acc" => Ok(Metric::Accuracy),
            "precision" => Ok(Metric::Precision),
            "recall" => Ok(Metric::Recall),
            "f1" => Ok(Metric::F1),
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }
}

impl FromStr for Average {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" => Ok(Average::Binary),
            "macro" => Ok(Average::Macro),
            "weighted" => Ok(Average::Weighted),
            "micro" => Ok(Average::Micro),
            other => Err(Error::Config(format!("unknown averaging '{other}'"))),
        }
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    /// `metric` or `metric-average`; averaging defaults to weighted.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('-') {
            Some((m, a)) => Ok(MetricKind::new(m.parse()?, a.parse()?)),
            None => Ok(MetricKind::new(s.parse()?, Average::Weighted)),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kind(m: Metric, a: Average) -> MetricKind {
        MetricKind::new(m, a)
    }

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 2, 1, 0];
        let c = confusion(&y, &y, 3).unwrap();
        assert!(c.fp.iter().chain(&c.fn_).all(|&v| v == 0));
        for m in [Metric::Accuracy, Metric::Precision, Metric::Recall, Metric::F1] {
            assert_eq!(score(&c, kind(m, Average::Weighted)).unwrap().value, 1.0);
        }
    }

    #[test]
    fn metric_kind_labels_round_trip() {
        for label in ["accuracy", "f1", "precision-macro", "recall-micro", "f1-binary"] {
            assert_eq!(label.parse::<MetricKind>().unwrap().label(), label);
        }
        assert_eq!("recall-weighted".parse::<MetricKind>().unwrap().label(), "recall");
        assert!("f1-mean".parse::<MetricKind>().is_err());
    }

    #[test]
    fn hand_counted_example() {
        let c = confusion(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert_eq!((c.tp[1], c.fp[1], c.fn_[1], c.tn[1]), (2, 1, 0, 1));
        let p = score(&c, kind(Metric::Precision, Average::Binary)).unwrap().value;
        let r = score(&c, kind(Metric::Recall, Average::Binary)).unwrap().value;
        let f = score(&c, kind(Metric::F1, Average::Binary)).unwrap().value;
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r, 1.0);
        assert!((f - 0.8).abs() < 1e-15);
    }

    #[test]
    fn all_one_class_predictions() {
        let c = confusion(&[0, 0, 1, 1], &[0, 0, 0, 0], 2).unwrap();
        assert_eq!(c.tp[1], 0);
        let macro_recall = score(&c, kind(Metric::Recall, Average::Macro)).unwrap();
        assert_eq!(macro_recall.value, 0.5);
        let p1 = score(&c, kind(Metric::Precision, Average::Binary)).unwrap();
        assert_eq!(p1.value, 0.0);
        assert!(p1.zero_division);
    }

    #[test]
    fn binary_needs_two_classes() {
        let c = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert!(score(&c, kind(Metric::F1, Average::Binary)).is_err());
    }

    #[test]
    fn length_mismatch_is_a_shape_error() {
        assert!(matches!(confusion(&[0, 1], &[0], 2), Err(Error::Shape { .. })));
    }

    #[test]
    fn micro_equals_accuracy_for_single_label() {
        let t = [0, 1, 2, 2, 1, 0, 1];
        let p = [0, 2, 2, 1, 1, 0, 0];
        let c = confusion(&t, &p, 3).unwrap();
        let acc = score(&c, MetricKind::accuracy()).unwrap().value;
        for m in [Metric::Precision, Metric::Recall, Metric::F1] {
            assert!((score(&c, kind(m, Average::Micro)).unwrap().value - acc).abs() < 1e-15);
        }
    }

    fn labels(c: usize, n: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (prop::collection::vec(0..c, n), prop::collection::vec(0..c, n))
    }

    proptest! {
        #[test]
        fn counts_are_consistent((t, p) in labels(4, 30)) {
            let c = confusion(&t, &p, 4).unwrap();
            for k in 0..4 {
                prop_assert_eq!(c.tp[k] + c.fp[k] + c.fn_[k] + c.tn[k], c.n);
            }
            prop_assert_eq!(c.support.iter().sum::<usize>(), c.n);
        }

        #[test]
        fn scores_in_unit_interval_and_f1_between_p_and_r((t, p) in labels(3, 25)) {
            let c = confusion(&t, &p, 3).unwrap();
            for avg in [Average::Macro, Average::Weighted, Average::Micro] {
                for m in [Metric::Accuracy, Metric::Precision, Metric::Recall, Metric::F1] {
                    let v = score(&c, kind(m, avg)).unwrap().value;
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            for k in 0..3 {
                let [(pk, _), (rk, _), (fk, _)] = per_class(&c, k);
                if pk > 0.0 && rk > 0.0 {
                    prop_assert!(fk >= pk.min(rk) - 1e-12 && fk <= pk.max(rk) + 1e-12);
                }
            }
        }

        #[test]
        fn accuracy_is_weighted_recall((t, p) in labels(5, 40)) {
            let c = confusion(&t, &p, 5).unwrap();
            let acc = score(&c, MetricKind::accuracy()).unwrap().value;
            let wr = score(&c, kind(Metric::Recall, Average::Weighted)).unwrap().value;
            prop_assert!((acc - wr).abs() <= 1e-12);
        }
    }
}
