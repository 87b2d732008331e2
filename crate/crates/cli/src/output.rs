//! CSV rendering and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::analysis::Spike;
use crate::experiment::{CellKey, CellRun, SummaryRow};
use crate::error::{io_error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_error(dir))?;
    tmp.write_all(contents).map_err(io_error(path))?;
    tmp.persist(path).map_err(|e| io_error(path)(e.error))?;
    Ok(())
}

pub fn format_delta(delta: f64) -> String {
    format!("{delta:e}")
}

pub fn batch_label(batch: Option<usize>) -> String {
    batch.map_or_else(|| "full".to_string(), |b| b.to_string())
}

pub fn trace_file_name(key: &CellKey, seed: u64) -> String {
    format!(
        "trace_{}_d{}_b{}_s{seed}.csv",
        key.algorithm,
        format_delta(key.delta),
        batch_label(key.batch)
    )
}

pub fn trace_csv(run: &CellRun) -> String {
    run.trace.to_csv(run.bound.as_deref())
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "algorithm",
        "delta",
        "batch",
        "tail_err_mean",
        "tail_err_std",
        "diverged_fraction",
        "mean_rounds_per_iter",
    ])?;
    for r in rows {
        w.write_record([
            r.key.algorithm.to_string(),
            format_delta(r.key.delta),
            batch_label(r.key.batch),
            format!("{:e}", r.tail_err_mean),
            format!("{:e}", r.tail_err_std),
            format!("{}", r.diverged_fraction),
            format!("{}", r.mean_rounds_per_iter),
        ])?;
    }
    finish(w)
}

/// Wide table: one row per `row_labels` entry, one column per header.
pub fn wide_csv(index: &str, headers: &[String], row_labels: &[String], values: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once(index.to_string()).chain(headers.iter().cloned()))?;
    for (label, row) in row_labels.iter().zip(values) {
        w.write_record(std::iter::once(label.clone()).chain(row.iter().map(|v| format!("{v:e}"))))?;
    }
    finish(w)
}

pub fn spikes_csv(rows: &[(CellKey, Spike)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "algorithm",
        "delta",
        "batch",
        "boundary",
        "pre_plateau",
        "spike",
        "spike_ratio",
        "post_plateau",
        "post_ratio",
        "spike_detected",
        "recontracted",
    ])?;
    for (key, s) in rows {
        w.write_record([
            key.algorithm.to_string(),
            format_delta(key.delta),
            batch_label(key.batch),
            s.boundary.to_string(),
            format!("{:e}", s.pre_plateau),
            format!("{:e}", s.spike),
            format!("{}", s.ratio()),
            format!("{:e}", s.post_plateau),
            format!("{}", s.post_ratio),
            s.detected().to_string(),
            s.recontracted().to_string(),
        ])?;
    }
    finish(w)
}

/// Writes `(name, contents)` pairs into `dir` and returns the paths.
pub fn write_all(dir: &Path, files: Vec<(String, String)>) -> Result<Vec<PathBuf>> {
    files
        .into_iter()
        .map(|(name, contents)| {
            let path = dir.join(name);
            write_atomic(&path, contents.as_bytes())?;
            Ok(path)
        })
        .collect()
}
