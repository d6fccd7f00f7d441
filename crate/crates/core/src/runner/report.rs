use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::json;
use sha2::{Digest, Sha256};

use super::matrix::{CellResult, ResultTable};
use crate::error::{Error, Result};

/// Files written by [`emit_reports`]; `sample_size.csv` only for
/// sample-size sweeps.
pub const REPORT_FILES: [&str; 7] = [
    "manifest.json",
    "cells.csv",
    "summary.txt",
    "similarity_long.csv",
    "jaccard_long.csv",
    "rfi_long.csv",
    "sample_size.csv",
];

/// File contents ready to write.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedReports {
    pub manifest_sha256: String,
    pub files: Vec<(String, String)>,
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn size_key(c: &CellResult) -> String {
    opt(c.sample_size)
}

fn manifest(table: &ResultTable, files: &[&str]) -> Result<String> {
    let mut config = serde_json::to_value(&table.config)?;
    if let Some(obj) = config.as_object_mut() {
        // Worker count and output location never change results.
        obj.remove("jobs");
        obj.remove("out");
    }
    let backends: BTreeSet<(String, String, String)> = table
        .cells
        .iter()
        .map(|c| (c.dataset.clone(), c.model.clone(), c.backend.to_string()))
        .collect();
    let grid = table.config.perturbation_grid()?;
    let metrics: Vec<String> = table.config.metric_kinds()?.iter().map(|m| m.label()).collect();
    let value = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "seeds": table.config.replicate_seeds(),
        "grid": { "points": grid.points(), "weights": grid.weights() },
        "metrics": metrics,
        "datasets": table.datasets,
        "backends": backends
            .iter()
            .map(|(d, m, b)| json!({ "dataset": d, "model": m, "backend": b }))
            .collect::<Vec<_>>(),
        "sample_sizes": table.sample_sizes,
        "cells": table.cells.len(),
        "expected_cells": table.expected_cells(),
        "skip_count": table.skips.len(),
        "skips": table.skips,
        "files": files,
    });
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn cells_csv(table: &ResultTable, hash: &str) -> Result<String> {
    let mut rows = vec![[
        "manifest_sha256", "seed", "dataset", "model", "metric", "sample_size", "backend", "n_train", "n_test",
        "features", "base_score", "cosine", "jaccard_mean_k10", "static_degenerate", "dynamic_degenerate",
        "noop_cells", "efficiency_gap", "warning",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()];
    for c in &table.cells {
        rows.push(vec![
            hash.to_string(),
            c.seed.to_string(),
            c.dataset.clone(),
            c.model.clone(),
            c.metric.clone(),
            size_key(c),
            c.backend.to_string(),
            c.n_train.to_string(),
            c.n_test.to_string(),
            c.feature_names.len().to_string(),
            c.base_score.to_string(),
            c.cosine.to_string(),
            opt(c.jaccard_mean()),
            c.static_degenerate.to_string(),
            c.dynamic_degenerate.to_string(),
            c.noop_cells.to_string(),
            c.efficiency_gap.to_string(),
            c.warning.clone().unwrap_or_default(),
        ]);
    }
    csv_string(rows)
}

fn similarity_long(table: &ResultTable, hash: &str) -> Result<String> {
    let mut rows = vec![vec!["manifest_sha256", "seed", "dataset", "model", "metric", "sample_size", "cosine"]
        .into_iter()
        .map(String::from)
        .collect()];
    for c in &table.cells {
        rows.push(vec![
            hash.to_string(),
            c.seed.to_string(),
            c.dataset.clone(),
            c.model.clone(),
            c.metric.clone(),
            size_key(c),
            c.cosine.to_string(),
        ]);
    }
    csv_string(rows)
}

fn jaccard_long(table: &ResultTable, hash: &str) -> Result<String> {
    let mut rows = vec![vec!["manifest_sha256", "seed", "dataset", "model", "metric", "sample_size", "k", "jaccard"]
        .into_iter()
        .map(String::from)
        .collect()];
    for c in &table.cells {
        for (i, j) in c.jaccard_curve.iter().flatten().enumerate() {
            rows.push(vec![
                hash.to_string(),
                c.seed.to_string(),
                c.dataset.clone(),
                c.model.clone(),
                c.metric.clone(),
                size_key(c),
                (i + 1).to_string(),
                j.to_string(),
            ]);
        }
    }
    csv_string(rows)
}

fn rfi_long(table: &ResultTable, hash: &str) -> Result<String> {
    let mut rows = vec![vec![
        "manifest_sha256", "seed", "dataset", "model", "metric", "sample_size", "feature", "static", "dynamic",
    ]
    .into_iter()
    .map(String::from)
    .collect()];
    for c in &table.cells {
        for (j, name) in c.feature_names.iter().enumerate() {
            rows.push(vec![
                hash.to_string(),
                c.seed.to_string(),
                c.dataset.clone(),
                c.model.clone(),
                c.metric.clone(),
                size_key(c),
                name.clone(),
                c.static_rfi[j].to_string(),
                c.dynamic_rfi[j].to_string(),
            ]);
        }
    }
    csv_string(rows)
}

/// Mean cosine per sample size over seeds, models and datasets.
fn similarity_by_size(table: &ResultTable) -> Vec<Option<f64>> {
    table
        .sample_sizes
        .iter()
        .map(|&size| {
            let v: Vec<f64> = table.cells.iter().filter(|c| c.sample_size == Some(size)).map(|c| c.cosine).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect()
}

fn sample_size_csv(table: &ResultTable, hash: &str) -> Result<String> {
    let mut header = vec!["manifest_sha256".to_string(), "row".to_string()];
    header.extend(table.sample_sizes.iter().map(|s| s.to_string()));
    let mut row = vec![hash.to_string(), "Similarity".to_string()];
    row.extend(similarity_by_size(table).into_iter().map(opt));
    csv_string(vec![header, row])
}

fn summary_txt(table: &ResultTable, hash: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "xai-harmony {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "manifest sha256: {hash}");
    let _ = writeln!(
        s,
        "cells: {} of {} expected, skipped: {}",
        table.cells.len(),
        table.expected_cells(),
        table.skips.len()
    );
    for d in &table.datasets {
        let _ = writeln!(s, "dataset {}: {} rows, {} columns, {}", d.name, d.rows, d.columns, d.origin);
    }

    let models: Vec<String> = table.config.models.clone();
    let mut grid: BTreeMap<(String, String), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for c in table.cells.iter().filter(|c| c.sample_size.is_none()) {
        grid.entry((c.dataset.clone(), c.metric.clone()))
            .or_default()
            .entry(c.model.clone())
            .or_default()
            .push(c.cosine);
    }
    if !grid.is_empty() {
        let _ = writeln!(s, "\nCosine similarity, static vs dynamic (mean over seeds)");
        let _ = write!(s, "{:<16}{:<18}", "dataset", "metric");
        for m in &models {
            let _ = write!(s, "{m:>8}");
        }
        s.push('\n');
        for ((dataset, metric), by_model) in &grid {
            let _ = write!(s, "{dataset:<16}{metric:<18}");
            for m in &models {
                match by_model.get(m.as_str()).or_else(|| by_model.get(&canonical(m))) {
                    Some(v) => {
                        let _ = write!(s, "{:>8.3}", v.iter().sum::<f64>() / v.len() as f64);
                    }
                    None => {
                        let _ = write!(s, "{:>8}", "-");
                    }
                }
            }
            s.push('\n');
        }
    }

    if !table.sample_sizes.is_empty() {
        let _ = writeln!(s, "\nSimilarity by sample size");
        let _ = write!(s, "{:<12}", "|X|");
        for size in &table.sample_sizes {
            let _ = write!(s, "{size:>8}");
        }
        let _ = write!(s, "\n{:<12}", "Similarity");
        for v in similarity_by_size(table) {
            match v {
                Some(v) => {
                    let _ = write!(s, "{v:>8.3}");
                }
                None => {
                    let _ = write!(s, "{:>8}", "-");
                }
            }
        }
        s.push('\n');
    }

    if !table.summary.is_empty() {
        let _ = writeln!(s, "\nCosine summary");
        let _ = writeln!(s, "{:<15}{:<28}{:>6}{:>9}{:>9}", "grouping", "key", "n", "mean", "std");
        for g in &table.summary {
            let _ = writeln!(s, "{:<15}{:<28}{:>6}{:>9.4}{:>9.4}", g.grouping, g.key, g.count, g.mean, g.std);
        }
    }

    let jaccard: Vec<&CellResult> = table.cells.iter().filter(|c| c.jaccard_curve.is_some()).collect();
    if !jaccard.is_empty() {
        let _ = writeln!(s, "\nMean top-k Jaccard, k = 1..min(10, m)");
        for c in jaccard {
            let _ = writeln!(
                s,
                "seed {} {} {} {}: {:.4}",
                c.seed,
                c.dataset,
                c.model,
                c.metric,
                c.jaccard_mean().expect("curve present")
            );
        }
    }

    let warned: Vec<&CellResult> = table.cells.iter().filter(|c| c.warning.is_some()).collect();
    if !warned.is_empty() {
        let _ = writeln!(s, "\nWarnings");
        for c in warned {
            let _ = writeln!(
                s,
                "seed {} {} {} {}: {}",
                c.seed,
                c.dataset,
                c.model,
                c.metric,
                c.warning.as_deref().unwrap_or_default()
            );
        }
    }
    if !table.skips.is_empty() {
        let _ = writeln!(s, "\nSkipped cells");
        for k in &table.skips {
            let size = k.sample_size.map(|n| format!(" |X|={n}")).unwrap_or_default();
            let _ = writeln!(s, "seed {} {} {} {}{}: {}", k.seed, k.dataset, k.model, k.metric, size, k.reason);
        }
    }
    s
}

/// Configured model names may be aliases; cells carry canonical names.
fn canonical(name: &str) -> String {
    name.parse::<crate::models::ModelKind>()
        .map(|k| k.name().to_string())
        .unwrap_or_else(|_| name.to_string())
}

/// Render every report in memory. Deterministic in the table contents.
pub fn render_reports(table: &ResultTable) -> Result<RenderedReports> {
    let names: Vec<&str> = REPORT_FILES
        .iter()
        .copied()
        .filter(|&f| f != "sample_size.csv" || !table.sample_sizes.is_empty())
        .collect();
    let manifest = manifest(table, &names)?;
    let hash = hex::encode(Sha256::digest(manifest.as_bytes()));
    let mut files = vec![("manifest.json".to_string(), manifest)];
    for &name in &names[1..] {
        let content = match name {
            "cells.csv" => cells_csv(table, &hash)?,
            "summary.txt" => summary_txt(table, &hash),
            "similarity_long.csv" => similarity_long(table, &hash)?,
            "jaccard_long.csv" => jaccard_long(table, &hash)?,
            "rfi_long.csv" => rfi_long(table, &hash)?,
            "sample_size.csv" => sample_size_csv(table, &hash)?,
            _ => unreachable!("unknown report file"),
        };
        files.push((name.to_string(), content));
    }
    Ok(RenderedReports {
        manifest_sha256: hash,
        files,
    })
}

/// Render all reports, check that `dir` is writable, then write them.
pub fn emit_reports(table: &ResultTable, dir: impl AsRef<Path>) -> Result<RenderedReports> {
    let dir = dir.as_ref();
    let rendered = render_reports(table)?;
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    for (name, content) in &rendered.files {
        fs::write(dir.join(name), content)?;
    }
    Ok(rendered)
}
