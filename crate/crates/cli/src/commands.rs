//! The experiment subcommands: each resolves a config with its own defaults,
//! runs the cells and writes CSV outputs.

use std::path::{Path, PathBuf};

use ftqc_core::Algorithm;

use crate::analysis::{epoch_spikes, pointwise_mean};
use crate::config::{Defaults, Experiment, ExperimentConfig, Overrides};
use crate::error::{CliError, Result};
use crate::experiment::{cell, run_cells, summarize, CellKey, CellRun};
use crate::output::{self, format_delta, batch_label, SUMMARY_FILE};

/// Quantization levels of the static comparison.
pub const QUANTIZATION_GRID: [f64; 7] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];
/// Level at which the static comparison also dumps full traces.
pub const TRACE_DELTA: f64 = 1e-2;
pub const BATCH_DELTA: f64 = 1e-4;
pub const ONLINE_DELTAS: [f64; 3] = [1e-4, 1e-3, 1e-2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Run,
    SweepQuantization,
    SweepBatch,
    Online,
}

impl Study {
    fn defaults(self, cfg: &ExperimentConfig) -> Defaults {
        let ftqc = vec![Algorithm::FtqcDgd];
        match self {
            Study::Run => Defaults {
                algorithms: ftqc,
                deltas: vec![TRACE_DELTA],
                batches: vec![None],
            },
            Study::SweepQuantization => Defaults {
                algorithms: Algorithm::ALL.to_vec(),
                deltas: QUANTIZATION_GRID.to_vec(),
                batches: vec![None],
            },
            Study::SweepBatch => {
                let m = cfg.problem.samples;
                Defaults {
                    algorithms: ftqc,
                    deltas: vec![BATCH_DELTA],
                    batches: ((m / 2).max(1)..=m).map(Some).collect(),
                }
            }
            Study::Online => Defaults {
                algorithms: ftqc,
                deltas: ONLINE_DELTAS.to_vec(),
                batches: vec![None],
            },
        }
    }
}

/// Parses and validates `text` for `study`.
pub fn prepare(study: Study, text: &str, overrides: Overrides) -> Result<Experiment> {
    let cfg = ExperimentConfig::parse(text)?;
    let mut exp = cfg.resolve(text, &study.defaults(&cfg), overrides)?;
    match study {
        Study::SweepQuantization | Study::SweepBatch if exp.is_online => {
            return Err(CliError::Usage(
                "this sweep needs a static problem: remove problem.change_period or make it at least run.horizon".into(),
            ));
        }
        Study::Online if !exp.is_online => {
            return Err(CliError::Usage(
                "the online study needs problem.change_period smaller than run.horizon".into(),
            ));
        }
        Study::SweepBatch if !exp.batches.contains(&None) => exp.batches.push(None),
        _ => {}
    }
    Ok(exp)
}

pub fn load(study: Study, path: &Path, overrides: Overrides) -> Result<Experiment> {
    let (_, text) = ExperimentConfig::load(path)?;
    prepare(study, &text, overrides)
}

/// Runs `study` and writes its outputs into `out`.
pub fn execute(study: Study, exp: &Experiment, out: &Path, jobs: Option<usize>) -> Result<Vec<PathBuf>> {
    let runs = run_cells(exp, jobs)?;
    let files = render(study, exp, &runs)?;
    output::write_all(out, files)
}

/// File names and contents for a finished study.
pub fn render(study: Study, exp: &Experiment, runs: &[CellRun]) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    match study {
        Study::Run => {
            for r in runs {
                files.push((output::trace_file_name(&r.key, r.seed), output::trace_csv(r)));
            }
        }
        Study::SweepQuantization => {
            files.push(("quantization.csv".into(), quantization_table(exp, runs)?));
            if let Some(fig) = trace_figure(exp, runs)? {
                files.push(("quantization_traces.csv".into(), fig));
            }
        }
        Study::SweepBatch => files.push(("batch.csv".into(), batch_table(exp, runs)?)),
        Study::Online => {
            let (traces, spikes) = online_tables(exp, runs)?;
            files.push(("online.csv".into(), traces));
            files.push(("spikes.csv".into(), spikes));
        }
    }
    files.push((SUMMARY_FILE.into(), output::summary_csv(&summarize(runs))?));
    Ok(files)
}

fn mean_tail(runs: &[CellRun], key: &CellKey) -> f64 {
    let tails: Vec<f64> = cell(runs, key).map(CellRun::tail_error).collect();
    tails.iter().sum::<f64>() / tails.len() as f64
}

fn quantization_table(exp: &Experiment, runs: &[CellRun]) -> Result<String> {
    let headers: Vec<String> = exp.algorithms.iter().map(|a| a.to_string()).collect();
    let labels: Vec<String> = exp.deltas.iter().map(|d| format_delta(*d)).collect();
    let batch = exp.batches[0];
    let values: Vec<Vec<f64>> = exp
        .deltas
        .iter()
        .map(|&delta| {
            exp.algorithms
                .iter()
                .map(|&algorithm| mean_tail(runs, &CellKey { algorithm, delta, batch }))
                .collect()
        })
        .collect();
    output::wide_csv("delta", &headers, &labels, &values)
}

/// First-seed traces of every algorithm at the trace level (or the first
/// level when it is not part of the grid).
fn trace_figure(exp: &Experiment, runs: &[CellRun]) -> Result<Option<String>> {
    let delta = exp.deltas.iter().copied().find(|d| *d == TRACE_DELTA).unwrap_or(exp.deltas[0]);
    let seed = exp.seeds[0];
    let series: Vec<Vec<f64>> = exp
        .algorithms
        .iter()
        .filter_map(|&algorithm| {
            let key = CellKey {
                algorithm,
                delta,
                batch: exp.batches[0],
            };
            cell(runs, &key).find(|r| r.seed == seed).map(|r| r.trace.errors())
        })
        .collect();
    if series.is_empty() {
        return Ok(None);
    }
    let headers: Vec<String> = exp.algorithms.iter().map(|a| a.to_string()).collect();
    Ok(Some(columns_csv("k", &headers, &series)?))
}

fn batch_table(exp: &Experiment, runs: &[CellRun]) -> Result<String> {
    let algorithm = exp.algorithms[0];
    let headers: Vec<String> = exp.deltas.iter().map(|d| format!("d{}", format_delta(*d))).collect();
    let labels: Vec<String> = exp.batches.iter().map(|b| batch_label(*b)).collect();
    let values: Vec<Vec<f64>> = exp
        .batches
        .iter()
        .map(|&batch| {
            exp.deltas
                .iter()
                .map(|&delta| mean_tail(runs, &CellKey { algorithm, delta, batch }))
                .collect()
        })
        .collect();
    output::wide_csv("batch", &headers, &labels, &values)
}

fn series_label(key: &CellKey) -> String {
    format!("{}_d{}_b{}", key.algorithm, format_delta(key.delta), batch_label(key.batch))
}

/// Seed-mean error trajectory of every cell, in run order.
pub fn seed_mean_traces(runs: &[CellRun]) -> Vec<(CellKey, Vec<f64>)> {
    let mut keys: Vec<CellKey> = Vec::new();
    for r in runs {
        if !keys.contains(&r.key) {
            keys.push(r.key);
        }
    }
    keys.into_iter()
        .map(|key| {
            let series: Vec<Vec<f64>> = cell(runs, &key).map(|r| r.trace.errors()).collect();
            (key, pointwise_mean(&series))
        })
        .collect()
}

fn online_tables(exp: &Experiment, runs: &[CellRun]) -> Result<(String, String)> {
    let means = seed_mean_traces(runs);
    let period = exp.problem.change_period;
    let headers: Vec<String> = means.iter().map(|(k, _)| series_label(k)).collect();
    let columns: Vec<Vec<f64>> = means.iter().map(|(_, m)| m.clone()).collect();
    let traces = columns_csv("k", &headers, &columns)?;

    let spikes: Vec<_> = means
        .iter()
        .flat_map(|(key, m)| epoch_spikes(m, period).into_iter().map(move |s| (*key, s)))
        .collect();
    Ok((traces, output::spikes_csv(&spikes)?))
}

/// Column-major series indexed by `k = 0, 1, ...`.
fn columns_csv(index: &str, headers: &[String], columns: &[Vec<f64>]) -> Result<String> {
    let len = columns.iter().map(Vec::len).min().unwrap_or(0);
    let labels: Vec<String> = (0..len).map(|k| k.to_string()).collect();
    let rows: Vec<Vec<f64>> = (0..len).map(|k| columns.iter().map(|c| c[k]).collect()).collect();
    output::wide_csv(index, headers, &labels, &rows)
}
