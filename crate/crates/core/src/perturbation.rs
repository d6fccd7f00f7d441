//! Dynamic sensitivity: perturb one test-set feature at a time over a grid
//! of factors in (0, 2), score the fixed model on each perturbed copy, and
//! fold the scores into a weighted average that favours factors near 1.

use std::str::FromStr;

use ndarray::Array2;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{check_deadline, Deadline};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricKind};
use crate::models::{predict_labels, ProbabilisticClassifier};
use crate::rfi::{Provenance, RfiSource, RfiVector};
use crate::seed;

/// Perturbation factors, each strictly inside (0, 2), with weights
/// `w = 1 − |1 − p|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

/// Weight of a perturbation factor.
pub fn grid_weight(p: f64) -> f64 {
    1.0 - (1.0 - p).abs()
}

impl PerturbationGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("perturbation grid is empty".into()));
        }
        if let Some(p) = points.iter().find(|&&p| !(p > 0.0 && p < 2.0)) {
            return Err(Error::Bounds(format!("perturbation factor {p} outside (0, 2)")));
        }
        let weights = points.iter().map(|&p| grid_weight(p)).collect();
        Ok(Self { points, weights })
    }

    /// Evenly spaced points `start, start + step, …` up to `stop` inclusive.
    pub fn range(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || stop < start {
            return Err(Error::Config(format!("invalid grid range {start}:{stop}:{step}")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // Round to 12 decimals so that 0.1-style steps land on exact decimals.
        let points = (0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `start:stop:step` form of an evenly spaced grid, or a comma list.
    pub fn describe(&self) -> String {
        self.points.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
    }
}

impl Default for PerturbationGrid {
    /// 0.1, 0.2, …, 1.9.
    fn default() -> Self {
        Self::new((1..=19).map(|i| f64::from(i) / 10.0).collect()).expect("default grid is valid")
    }
}

impl FromStr for PerturbationGrid {
    type Err = Error;

    /// Accepts `start:stop:step` or a comma-separated list of factors.
    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid grid value '{t}'")))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [a, b, c] => Self::range(num(a)?, num(b)?, num(c)?),
            [_] => Self::new(s.split(',').map(num).collect::<Result<_>>()?),
            _ => Err(Error::Config(format!("grid '{s}' is neither start:stop:step nor a list"))),
        }
    }
}

/// Weighted average `Σ w_i·s_i / Σ w_i`.
pub fn anwa(weights: &[f64], scores: &[f64]) -> f64 {
    let num: f64 = weights.iter().zip(scores).map(|(w, s)| w * s).sum();
    let den: f64 = weights.iter().sum();
    num / den
}

/// How a factor changes a boolean indicator column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CategoricalMode {
    /// Rescale the active count `c` to `clamp(round(p·c), 0, n)`, activating
    /// or deactivating uniformly chosen rows.
    #[default]
    TargetCount,
    /// Literal reading of the reference pseudocode: keep
    /// `round(c·(2 − p))` active rows when `p ≥ 1`, `round(c·(1 − p))`
    /// otherwise. Only ever deactivates.
    Pseudocode,
}

impl FromStr for CategoricalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target-count" => Ok(CategoricalMode::TargetCount),
            "pseudocode" => Ok(CategoricalMode::Pseudocode),
            other => Err(Error::Config(format!("unknown categorical mode '{other}'"))),
        }
    }
}

fn check_factor(p: f64) -> Result<()> {
    if p > 0.0 && p < 2.0 {
        Ok(())
    } else {
        Err(Error::Bounds(format!("perturbation factor {p} outside (0, 2)")))
    }
}

/// Copy of `test` with continuous column `j` multiplied by `p`.
pub fn perturb_continuous(test: &Dataset, j: usize, p: f64) -> Result<Dataset> {
    check_column(test, j)?;
    if test.is_indicator(j) {
        return Err(Error::Kind(format!("column '{}' is categorical", test.columns()[j].name)));
    }
    check_factor(p)?;
    let mut x = test.x().clone();
    x.column_mut(j).mapv_inplace(|v| v * p);
    Ok(test.with_x(x))
}

fn check_column(test: &Dataset, j: usize) -> Result<()> {
    if j >= test.n_columns() {
        return Err(Error::Bounds(format!("column {j} outside [0, {})", test.n_columns())));
    }
    Ok(())
}

/// Result of a categorical perturbation.
#[derive(Debug, Clone)]
pub struct CategoricalPerturbation {
    pub data: Dataset,
    /// Active rows before and after.
    pub before: usize,
    pub after: usize,
    /// Set when the column had no active rows and the factor could only
    /// shrink it, so nothing changed.
    pub noop: bool,
}

pub fn perturb_categorical(test: &Dataset, j: usize, p: f64, seed: u64) -> Result<CategoricalPerturbation> {
    perturb_categorical_with(test, j, p, seed, CategoricalMode::TargetCount)
}

/// Copy of `test` with the number of active rows of indicator column `j`
/// rescaled by `p`. Activating a row clears its sibling indicators;
/// deactivating leaves the row with no active sibling.
pub fn perturb_categorical_with(
    test: &Dataset,
    j: usize,
    p: f64,
    seed: u64,
    mode: CategoricalMode,
) -> Result<CategoricalPerturbation> {
    check_column(test, j)?;
    if !test.is_indicator(j) {
        return Err(Error::Kind(format!("column '{}' is continuous", test.columns()[j].name)));
    }
    check_factor(p)?;
    let n = test.n_rows();
    let column = test.x().column(j);
    let active: Vec<usize> = (0..n).filter(|&i| column[i] == 1.0).collect();
    let inactive: Vec<usize> = (0..n).filter(|&i| column[i] != 1.0).collect();
    let c = active.len();

    let (target, noop) = match mode {
        CategoricalMode::TargetCount if c == 0 => {
            if p > 1.0 {
                // Treat an absent category as a single seed row.
                (((p).round() as usize).min(n), false)
            } else {
                (0, true)
            }
        }
        CategoricalMode::TargetCount => (((p * c as f64).round() as usize).min(n), false),
        CategoricalMode::Pseudocode => {
            let keep = if p >= 1.0 { 2.0 - p } else { 1.0 - p };
            (((c as f64 * keep).round() as usize).min(c), c == 0)
        }
    };

    let mut x = test.x().clone();
    let mut rng = seed::rng(seed);
    if target < c {
        for k in index::sample(&mut rng, c, c - target) {
            x[[active[k], j]] = 0.0;
        }
    } else if target > c {
        let siblings = test.siblings(j);
        for k in index::sample(&mut rng, inactive.len(), target - c) {
            let row = inactive[k];
            for &s in &siblings {
                x[[row, s]] = 0.0;
            }
            x[[row, j]] = 1.0;
        }
    }
    Ok(CategoricalPerturbation {
        data: test.with_x(x),
        before: c,
        after: target,
        noop,
    })
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub metric: MetricKind,
    pub seed: u64,
    pub categorical_mode: CategoricalMode,
    /// Model label recorded in the result.
    pub model_name: String,
    pub deadline: Option<Deadline>,
}

impl SweepOptions {
    pub fn new(metric: MetricKind, seed: u64) -> Self {
        Self {
            metric,
            seed,
            categorical_mode: CategoricalMode::TargetCount,
            model_name: "custom".into(),
            deadline: None,
        }
    }
}

/// Scores of every (feature, factor) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// `m × |P|` metric values on the perturbed test sets.
    pub scores: Array2<f64>,
    /// Metric on the unperturbed test set.
    pub base_score: f64,
    /// Weighted average per feature.
    pub anwa: Vec<f64>,
    pub grid: PerturbationGrid,
    pub feature_names: Vec<String>,
    pub metric: MetricKind,
    pub categorical_mode: CategoricalMode,
    /// Cells whose categorical perturbation was a no-op.
    pub noop_cells: usize,
    pub model: String,
    pub dataset: String,
    pub seed: u64,
}

impl SweepResult {
    /// CSV with one row per feature: the score at every grid point, then
    /// the weighted average. The first data row holds the base score.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["feature".to_string()];
        header.extend(self.grid.points().iter().map(|p| format!("p={p}")));
        header.push("anwa".into());
        w.write_record(&header)?;
        let mut base = vec!["<base>".to_string()];
        base.extend(std::iter::repeat_n(format!("{:.12}", self.base_score), self.grid.len() + 1));
        w.write_record(&base)?;
        for (j, name) in self.feature_names.iter().enumerate() {
            let mut rec = vec![name.clone()];
            rec.extend(self.scores.row(j).iter().map(|v| format!("{v:.12}")));
            rec.push(format!("{:.12}", self.anwa[j]));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn sweep<M: ProbabilisticClassifier + ?Sized>(
    model: &M,
    test: &Dataset,
    grid: &PerturbationGrid,
    metric: MetricKind,
    seed: u64,
) -> Result<SweepResult> {
    sweep_with(model, test, grid, &SweepOptions::new(metric, seed))
}

/// Perturb each feature at each grid point, starting from the pristine test
/// set every time, and score the model's predictions.
pub fn sweep_with<M: ProbabilisticClassifier + ?Sized>(
    model: &M,
    test: &Dataset,
    grid: &PerturbationGrid,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    let m = test.n_columns();
    let c = test.class_count();
    let score = |data: &Dataset| -> Result<f64> {
        let pred = predict_labels(model, data.x())?;
        Ok(evaluate(data.y(), &pred, c, opts.metric)?.value)
    };
    let base_score = score(test)?;

    let np = grid.len();
    let cells: Vec<(f64, bool)> = (0..m * np)
        .into_par_iter()
        .map(|cell| {
            check_deadline(opts.deadline.as_ref())?;
            let (j, i) = (cell / np, cell % np);
            let p = grid.points()[i];
            if test.is_indicator(j) {
                let cell_seed = seed::derive(opts.seed, &[j as u64, i as u64]);
                let out = perturb_categorical_with(test, j, p, cell_seed, opts.categorical_mode)?;
                Ok((score(&out.data)?, out.noop))
            } else {
                Ok((score(&perturb_continuous(test, j, p)?)?, false))
            }
        })
        .collect::<Result<_>>()?;

    let scores = Array2::from_shape_fn((m, np), |(j, i)| cells[j * np + i].0);
    let anwa = (0..m)
        .map(|j| anwa(grid.weights(), scores.row(j).as_slice().expect("contiguous")))
        .collect();
    Ok(SweepResult {
        scores,
        base_score,
        anwa,
        grid: grid.clone(),
        feature_names: test.column_names(),
        metric: opts.metric,
        categorical_mode: opts.categorical_mode,
        noop_cells: cells.iter().filter(|c| c.1).count(),
        model: opts.model_name.clone(),
        dataset: test.name().to_string(),
        seed: opts.seed,
    })
}

/// Normalized absolute deviations `|base − anwa_j|`.
pub fn dynamic_rfi(sweep: &SweepResult) -> Result<RfiVector> {
    let deviations = sweep.anwa.iter().map(|a| (sweep.base_score - a).abs()).collect();
    RfiVector::from_magnitudes(
        deviations,
        sweep.feature_names.clone(),
        RfiSource::DynamicAnwa,
        Provenance::new(&sweep.dataset, &sweep.model, sweep.metric.label(), sweep.seed),
    )
}
