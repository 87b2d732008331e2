//! Runs every (algorithm, quantization level, batch size, seed) cell of an
//! experiment.
//!
//! Cells sharing a (seed, level, batch) triple form one job: FTQC-DGD runs
//! first and its per-iteration round counts become the budget of the
//! baselines. Jobs run on a rayon pool; results are returned in a fixed
//! order regardless of scheduling.

use ftqc_core::optimizers::{self, RunConfig};
use ftqc_core::theory::{self, coordination_bound};
use ftqc_core::{Algorithm, BoundParams, Problem, ProblemConfig, Trace};
use log::{info, warn};
use rayon::prelude::*;

use crate::analysis::{mean_std, tail_window_ratio};
use crate::config::Experiment;
use crate::error::{CliError, Result};

/// Draws used to estimate the stochastic gradient error.
pub const TAU_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub algorithm: Algorithm,
    pub delta: f64,
    /// `None` is the exact gradient.
    pub batch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    pub key: CellKey,
    pub seed: u64,
    pub alpha: f64,
    pub trace: Trace,
    /// Theoretical mean-error bound per record, when requested.
    pub bound: Option<Vec<f64>>,
}

impl CellRun {
    pub fn tail_error(&self) -> f64 {
        self.trace.tail_error().unwrap_or(f64::NAN)
    }

    pub fn rounds_per_iteration(&self) -> f64 {
        let last = self.trace.records.last().map_or(0, |r| r.rounds);
        last as f64 / (self.trace.records.len().max(2) - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: CellKey,
    pub tail_err_mean: f64,
    pub tail_err_std: f64,
    pub diverged_fraction: f64,
    pub mean_rounds_per_iter: f64,
}

fn build_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

fn problem_for(exp: &Experiment, seed: u64) -> Result<Problem> {
    Ok(Problem::generate(ProblemConfig {
        seed,
        ..exp.problem.clone()
    })?)
}

/// Runs every cell. The order is algorithm, then level, then batch, then seed,
/// following the order of the config lists.
pub fn run_cells(exp: &Experiment, jobs: Option<usize>) -> Result<Vec<CellRun>> {
    let pool = build_pool(jobs)?;
    pool.install(|| {
        let problems: Vec<Problem> = exp
            .seeds
            .par_iter()
            .map(|&s| problem_for(exp, s))
            .collect::<Result<_>>()?;

        let mut groups = Vec::new();
        for (si, &seed) in exp.seeds.iter().enumerate() {
            for &delta in &exp.deltas {
                for &batch in &exp.batches {
                    groups.push((si, seed, delta, batch));
                }
            }
        }
        info!(
            "running {} jobs ({} algorithms, {} levels, {} batch sizes, {} seeds)",
            groups.len(),
            exp.algorithms.len(),
            exp.deltas.len(),
            exp.batches.len(),
            exp.seeds.len()
        );
        let runs: Vec<Vec<CellRun>> = groups
            .par_iter()
            .map(|&(si, seed, delta, batch)| run_group(exp, &problems[si], seed, delta, batch))
            .collect::<Result<_>>()?;

        let mut flat: Vec<CellRun> = runs.into_iter().flatten().collect();
        let position = |key: &CellKey, seed: u64| {
            (
                exp.algorithms.iter().position(|a| *a == key.algorithm),
                exp.deltas.iter().position(|d| *d == key.delta),
                exp.batches.iter().position(|b| *b == key.batch),
                exp.seeds.iter().position(|s| *s == seed),
            )
        };
        flat.sort_by_key(|r| position(&r.key, r.seed));
        Ok(flat)
    })
}

fn run_group(exp: &Experiment, problem: &Problem, seed: u64, delta: f64, batch: Option<usize>) -> Result<Vec<CellRun>> {
    let gamma = coordination_bound(delta, problem.dim(), problem.agents());
    let tau = match batch {
        Some(b) if b < exp.problem.samples => problem.estimate_tau(b, exp.rescale_batch, TAU_DRAWS, seed)?,
        _ => 0.0,
    };
    let alpha = exp.step.resolve(problem, gamma, tau)?;
    let cfg = RunConfig {
        batch,
        rescale_batch: exp.rescale_batch,
        quantizer: exp.quantizer,
        charge_votes: exp.charge_votes,
        max_rounds: exp.max_rounds,
        word_size: exp.word_size,
        ..RunConfig::new(delta, alpha)
    };

    let lead = optimizers::run(Algorithm::FtqcDgd, problem, &exp.graph, &cfg, exp.horizon, seed, None)?;
    let mut out = Vec::with_capacity(exp.algorithms.len());
    for &algorithm in &exp.algorithms {
        let key = CellKey { algorithm, delta, batch };
        let trace = match algorithm {
            Algorithm::FtqcDgd => lead.trace.clone(),
            _ => optimizers::run(algorithm, problem, &exp.graph, &cfg, exp.horizon, seed, Some(&lead.budget))?.trace,
        };
        let bound = if exp.bound && algorithm == Algorithm::FtqcDgd {
            bound_trajectory(problem, &trace, alpha, gamma, tau)?
        } else {
            None
        };
        if !exp.is_online && !trace.diverged() && tail_window_ratio(&trace.errors()) > 3.0 {
            warn!("{algorithm} delta={delta} seed={seed}: no plateau within the tail window");
        }
        out.push(CellRun {
            key,
            seed,
            alpha,
            trace,
            bound,
        });
    }
    Ok(out)
}

fn bound_trajectory(problem: &Problem, trace: &Trace, alpha: f64, gamma: f64, tau: f64) -> Result<Option<Vec<f64>>> {
    let c = problem.curvature_bounds();
    let params = BoundParams {
        alpha,
        lower: c.lower,
        upper: c.upper,
        sigma: problem.sigma_bound()?,
        gamma,
        tau,
        initial_error: trace.records.first().map_or(0.0, |r| r.err),
    };
    let bound: std::result::Result<Vec<f64>, _> = (0..trace.records.len())
        .map(|k| theory::mean_error_bound(k, &params))
        .collect();
    match bound {
        Ok(b) => Ok(Some(b)),
        Err(e) => {
            warn!("bound column skipped: {e}");
            Ok(None)
        }
    }
}

/// One row per (algorithm, level, batch), in run order.
pub fn summarize(runs: &[CellRun]) -> Vec<SummaryRow> {
    let mut keys: Vec<CellKey> = Vec::new();
    for r in runs {
        if !keys.contains(&r.key) {
            keys.push(r.key);
        }
    }
    keys.into_iter()
        .map(|key| {
            let cell: Vec<&CellRun> = runs.iter().filter(|r| r.key == key).collect();
            let tails: Vec<f64> = cell.iter().map(|r| r.tail_error()).collect();
            let (tail_err_mean, tail_err_std) = mean_std(&tails);
            let n = cell.len() as f64;
            SummaryRow {
                key,
                tail_err_mean,
                tail_err_std,
                diverged_fraction: cell.iter().filter(|r| r.trace.diverged()).count() as f64 / n,
                mean_rounds_per_iter: cell.iter().map(|r| r.rounds_per_iteration()).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Runs of one cell across seeds.
pub fn cell<'a>(runs: &'a [CellRun], key: &CellKey) -> impl Iterator<Item = &'a CellRun> + 'a {
    let key = *key;
    runs.iter().filter(move |r| r.key == key)
}
