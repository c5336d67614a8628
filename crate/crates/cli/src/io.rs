//! Input loading, label alignment, report envelopes and console tables.

use std::path::Path;

use anyhow::{bail, Context, Result};
use gfmm::dataset::{load_csv, CsvOptions, Dataset};
use gfmm::model_io::SavedModel;
use gfmm::{ClassId, IntervalPattern, UNLABELLED};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::{CsvArgs, UsageError};

pub const SCHEMA_VERSION: u32 = 1;

pub fn csv_options(args: &CsvArgs) -> CsvOptions {
    CsvOptions {
        has_header: if args.no_header {
            Some(false)
        } else if args.header {
            Some(true)
        } else {
            None
        },
        label_column: args.label_column,
        interval: args.interval,
        ..CsvOptions::default()
    }
}

/// Load a CSV and apply `--features`.
pub fn load_dataset(path: &Path, args: &CsvArgs) -> Result<Dataset> {
    let ds = load_csv(path, &csv_options(args)).with_context(|| format!("reading {}", path.display()))?;
    if args.features.is_empty() {
        return Ok(ds);
    }
    let columns = args
        .features
        .iter()
        .map(|f| {
            f.parse::<usize>()
                .ok()
                .or_else(|| ds.feature_names.iter().position(|n| n == f))
                .ok_or_else(|| UsageError(format!("unknown feature {f:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    ds.select_features(&columns).map_err(|e| UsageError(e.to_string()).into())
}

/// Identity of an input file that does not depend on where it lives.
pub fn file_record(path: &Path) -> Result<Value> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(json!({ "name": name, "sha256": format!("{:x}", Sha256::digest(&bytes)) }))
}

pub fn dataset_record(ds: &Dataset) -> Value {
    json!({
        "rows": ds.len(),
        "features": ds.feature_names,
        "classes": ds.class_names,
        "interval": ds.interval,
    })
}

/// Patterns for a dataset seen through a saved model: normalized with the
/// model's scaling and relabelled into the model's class ids. Classes the
/// model never saw get fresh ids so they always count as errors.
pub fn model_patterns(saved: &SavedModel, ds: &Dataset) -> Result<Vec<IntervalPattern>> {
    if ds.n_dims() != saved.model.n_dims() {
        bail!("data has {} features but the model expects {}", ds.n_dims(), saved.model.n_dims());
    }
    let mut next = saved.class_names.len().max(saved.model.classes().last().copied().unwrap_or(0) as usize) as ClassId;
    let remap: Vec<ClassId> = ds
        .class_names
        .iter()
        .map(|name| match saved.class_names.iter().position(|n| n == name) {
            Some(i) => i as ClassId + 1,
            None if saved.class_names.is_empty() => name.parse().unwrap_or_else(|_| {
                next += 1;
                next
            }),
            None => {
                next += 1;
                next
            }
        })
        .collect();
    let relabel = |l: ClassId| if l == UNLABELLED { l } else { remap[l as usize - 1] };
    (0..ds.len())
        .map(|i| {
            let (lo, hi) = match &saved.normalizer {
                Some(n) => (n.scale_row(&ds.lower[i]), n.scale_row(&ds.upper[i])),
                None => (ds.lower[i].clone(), ds.upper[i].clone()),
            };
            IntervalPattern::new(lo, hi, relabel(ds.labels[i])).with_context(|| format!("row {}", i + 1))
        })
        .collect()
}

/// The common report wrapper.
pub fn envelope(command: &str, config: Value, seed: Option<u64>, results: impl Serialize) -> Result<String> {
    let v = json!({
        "schema_version": SCHEMA_VERSION,
        "tool": "gfmm",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "seed": seed,
        "results": serde_json::to_value(results)?,
    });
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// A dataset-by-classifier table: first column names the dataset, the rest
/// are one column per classifier.
pub struct ScoreTable {
    pub classifiers: Vec<String>,
    pub datasets: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_score_table(path: &Path) -> Result<ScoreTable> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    if header.len() < 3 {
        bail!("{}: need a dataset column and at least two classifiers", path.display());
    }
    let classifiers: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut datasets = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: line {}", path.display(), i + 2))?;
        datasets.push(rec[0].to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().with_context(|| format!("{}: line {}: bad number {v:?}", path.display(), i + 2)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: no rows", path.display());
    }
    Ok(ScoreTable { classifiers, datasets, rows })
}

/// Left-align the first column and right-align the rest.
pub fn print_table(header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        println!("{}", parts.join("  ").trim_end());
    };
    line(header.to_vec());
    for r in rows {
        line(r.iter().map(String::as_str).collect());
    }
}
