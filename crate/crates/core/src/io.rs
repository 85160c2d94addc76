//! CSV and JSON input/output.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::PowerEstimate;
use crate::Matrix;

/// Formats `x` with six significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci
        .split_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    if (-5..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        sci
    }
}

/// Writes a labelled dataset with header `f1,...,fp,label`.
pub fn write_dataset<W: Write>(writer: W, data: &Matrix, labels: &[usize]) -> Result<()> {
    if labels.len() != data.nrows() {
        return Err(Error::InvalidData("one label per row required".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.ncols()).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (i, row) in data.row_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        rec.push(labels[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset`]. A trailing `label` column is
/// optional; without it every label is 0.
pub fn read_dataset<R: Read>(reader: R) -> Result<(Matrix, Vec<usize>)> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let has_label = headers.iter().next_back() == Some("label");
    let p = headers.len() - usize::from(has_label);
    if p == 0 {
        return Err(Error::NoFeatures);
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        for (j, field) in rec.iter().take(p).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::InvalidData(format!(
                    "row {}, column {}: not a number: {field:?}",
                    line + 1,
                    j + 1
                ))
            })?;
            values.push(v);
        }
        if has_label {
            let field = rec.get(p).unwrap_or_default();
            labels.push(field.trim().parse().map_err(|_| {
                Error::InvalidData(format!("row {}: bad label {field:?}", line + 1))
            })?);
        } else {
            labels.push(0);
        }
    }
    if labels.is_empty() {
        return Err(Error::InvalidData("dataset has no rows".into()));
    }
    Ok((Matrix::from_row_slice(labels.len(), p, &values), labels))
}

pub fn read_dataset_file(path: &Path) -> Result<(Matrix, Vec<usize>)> {
    read_dataset(File::open(path)?)
}

/// One line of the results table. Values are preformatted strings so that
/// rewriting a file reproduces it byte for byte.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub n: String,
    pub p: String,
    pub lambda: String,
    pub reps: String,
    pub rejections: String,
    pub power: String,
    pub ci_low: String,
    pub ci_high: String,
    pub seed: String,
    pub runtime_s: String,
}

impl ResultRow {
    /// `runtime_s` is left empty unless `record_runtime` is set, since wall
    /// time differs between otherwise identical runs.
    pub fn from_estimate(est: &PowerEstimate, record_runtime: bool) -> Self {
        let c = &est.cell;
        ResultRow {
            method: c.method.name().to_string(),
            n: c.n_per_group.to_string(),
            p: c.p.to_string(),
            lambda: c.lambda().map_or_else(|| "fixed".to_string(), fmt_sig),
            reps: c.reps.to_string(),
            rejections: est.rejections.to_string(),
            power: fmt_sig(est.power),
            ci_low: fmt_sig(est.wilson_ci95.0),
            ci_high: fmt_sig(est.wilson_ci95.1),
            seed: c.master_seed.to_string(),
            runtime_s: if record_runtime {
                fmt_sig(est.runtime_seconds)
            } else {
                String::new()
            },
        }
    }

    fn key(&self) -> (&str, &str, &str, &str, &str, &str) {
        (
            &self.method,
            &self.n,
            &self.p,
            &self.lambda,
            &self.reps,
            &self.seed,
        )
    }
}

pub fn write_results<W: Write>(writer: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "method",
            "n",
            "p",
            "lambda",
            "reps",
            "rejections",
            "power",
            "ci_low",
            "ci_high",
            "seed",
            "runtime_s",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Merges `rows` into the results file at `path`: rows with the same
/// method, n, p, lambda, reps and seed are replaced in place, others are
/// appended. The file is created when missing.
pub fn upsert_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut merged = if path.exists() {
        read_results(File::open(path)?)?
    } else {
        Vec::new()
    };
    for row in rows {
        match merged.iter_mut().find(|m| m.key() == row.key()) {
            Some(slot) => *slot = row.clone(),
            None => merged.push(row.clone()),
        }
    }
    let tmp = path.with_extension("tmp");
    write_results(File::create(&tmp)?, &merged)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// `{"config": ..., "results": [...]}` with per-replicate detail.
pub fn results_json(
    config: serde_json::Value,
    estimates: &[PowerEstimate],
) -> Result<serde_json::Value> {
    Ok(serde_json::json!({
        "config": config,
        "results": serde_json::to_value(estimates)?,
    }))
}
