//! FTQC-DGD and the budget-matched quantized baselines.
//!
//! All three methods share the same local step `y_i = x_i - alpha * g_i` and
//! differ in how the stacked `y` is pushed toward the consensus set:
//!
//! - FTQC-DGD runs the finite-time quantized coordination protocol and every
//!   agent adopts its agreed output.
//! - Near-DGD applies `R` quantized Metropolis mixing rounds.
//! - DGT mixes the iterate for `ceil(R/2)` rounds and a gradient tracker for
//!   `floor(R/2)` rounds.
//!
//! `R` for the baselines is read from the per-iteration round counts recorded
//! by an FTQC-DGD run on the same seed.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::digraph::{Digraph, MixMatrix};
use crate::error::{Error, Result};
use crate::ftqc::{self, FtqcConfig};
use crate::problems::Problem;
use crate::simnet::{derive_seed, seeded_rng, CommStats, Network};
use crate::theory;

const TAG_GRADIENT: u64 = 0x6772_6164;
const TAG_PROTOCOL: u64 = 0x6674_7163;

/// Tracking error reported once a run has blown up.
pub const ERROR_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    FtqcDgd,
    NearDgd,
    Dgt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::FtqcDgd, Algorithm::NearDgd, Algorithm::Dgt];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::FtqcDgd => "ftqc-dgd",
            Algorithm::NearDgd => "near-dgd",
            Algorithm::Dgt => "dgt",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?} (expected ftqc-dgd, near-dgd or dgt)"))
    }
}

/// Rounding rule for the values the baselines transmit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantizerKind {
    #[default]
    Floor,
    Nearest,
}

/// `delta * floor(v / delta)`.
pub fn quantize(v: f64, delta: f64) -> f64 {
    delta * (v / delta).floor()
}

fn quantize_with(kind: QuantizerKind, v: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        return v;
    }
    match kind {
        QuantizerKind::Floor => quantize(v, delta),
        QuantizerKind::Nearest => delta * (v / delta).round(),
    }
}

/// Replaces every row by the column-wise mean.
pub fn project_consensus(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
    broadcast_rows(&mean, x.nrows())
}

fn broadcast_rows(row: &Array1<f64>, rows: usize) -> Array2<f64> {
    row.broadcast((rows, row.len())).expect("row broadcast").to_owned()
}

fn stacked_norm(x: &Array2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Quantization level. Zero disables quantization in the baselines;
    /// FTQC-DGD requires a positive level unless `exact_projection` is set.
    pub delta: f64,
    pub alpha: f64,
    /// Mini-batch size; `None` uses exact local gradients.
    pub batch: Option<usize>,
    pub rescale_batch: bool,
    pub quantizer: QuantizerKind,
    /// Whether vote flooding rounds count toward the baselines' budget.
    pub charge_votes: bool,
    pub max_rounds: u64,
    pub word_size: u32,
    /// Replace the coordination protocol by the exact average.
    pub exact_projection: bool,
    /// A run is flagged diverged once its error exceeds this multiple of the
    /// initial error.
    pub divergence_ratio: f64,
}

impl RunConfig {
    pub fn new(delta: f64, alpha: f64) -> Self {
        Self {
            delta,
            alpha,
            batch: None,
            rescale_batch: false,
            quantizer: QuantizerKind::Floor,
            charge_votes: true,
            max_rounds: FtqcConfig::DEFAULT_MAX_ROUNDS,
            word_size: CommStats::DEFAULT_WORD_SIZE,
            exact_projection: false,
            divergence_ratio: 10.0,
        }
    }

    fn ftqc(&self, graph: &Digraph) -> FtqcConfig {
        FtqcConfig {
            max_rounds: self.max_rounds,
            word_size: self.word_size,
            ..FtqcConfig::for_graph(self.delta, graph)
        }
    }
}

/// How the step size is chosen from the problem constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSizePolicy {
    /// `2 / (lower + upper)`.
    OptimalContraction,
    /// Minimizer of the asymptotic error bound.
    MinAsymptoticBound,
    Fixed(f64),
}

impl StepSizePolicy {
    pub fn resolve(&self, problem: &Problem, gamma: f64, tau: f64) -> Result<f64> {
        let c = problem.curvature_bounds();
        let alpha = match *self {
            StepSizePolicy::OptimalContraction => c.optimal_step(),
            StepSizePolicy::MinAsymptoticBound => {
                theory::bound_minimizing_step(problem.sigma_bound()?, gamma, tau, c.lower, c.upper)?
            }
            StepSizePolicy::Fixed(a) => a,
        };
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidStepSize(alpha));
        }
        Ok(alpha)
    }
}

/// One record per iteration; record `k` describes `x_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub epoch: usize,
    /// `|x_k - x_k*|`.
    pub err: f64,
    /// Inexact-projection error of the step that produced `x_k`.
    pub err_proj: f64,
    /// Gradient error of the step that produced `x_k`.
    pub err_grad: f64,
    /// Cumulative counters.
    pub rounds: u64,
    pub messages: u64,
    pub bits: u64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub records: Vec<StepRecord>,
}

impl Trace {
    pub const CSV_HEADER: &'static str = "k,epoch,err,err_proj,err_grad,rounds,messages,bits,diverged";

    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.err).collect()
    }

    pub fn tail_error(&self) -> Result<f64> {
        theory::tail_error(&self.errors())
    }

    pub fn diverged(&self) -> bool {
        self.records.last().is_some_and(|r| r.diverged)
    }

    /// CSV with the fixed column set, plus a `bound` column when given.
    pub fn to_csv(&self, bound: Option<&[f64]>) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        if bound.is_some() {
            out.push_str(",bound");
        }
        out.push('\n');
        for (idx, r) in self.records.iter().enumerate() {
            let _ = write!(
                out,
                "{},{},{:e},{:e},{:e},{},{},{},{}",
                r.k,
                r.epoch,
                r.err,
                r.err_proj,
                r.err_grad,
                r.rounds,
                r.messages,
                r.bits,
                u8::from(r.diverged)
            );
            if let Some(b) = bound {
                let _ = write!(out, ",{:e}", b.get(idx).copied().unwrap_or(f64::NAN));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the columns written by [`Trace::to_csv`]; extra columns are ignored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (idx, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse { line: idx + 1, message };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() < 9 {
                return Err(bad(format!("expected at least 9 fields, got {}", f.len())));
            }
            let int = |s: &str| s.parse::<u64>().map_err(|e| bad(format!("{s:?}: {e}")));
            let float = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
            records.push(StepRecord {
                k: int(f[0])? as usize,
                epoch: int(f[1])? as usize,
                err: float(f[2])?,
                err_proj: float(f[3])?,
                err_grad: float(f[4])?,
                rounds: int(f[5])?,
                messages: int(f[6])?,
                bits: int(f[7])?,
                diverged: int(f[8])? != 0,
            });
        }
        Ok(Self { records })
    }
}

/// Stacked iterates plus per-algorithm auxiliaries.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    /// One row per agent.
    pub x: Array2<f64>,
    pub k: usize,
    pub algorithm: Algorithm,
    /// DGT gradient tracker.
    pub tracker: Option<Array2<f64>>,
    /// DGT: gradients evaluated at the current iterate.
    pub last_gradient: Option<Array2<f64>>,
    /// Rounds consumed per iteration so far.
    pub budget: Vec<u64>,
}

impl OptimizerState {
    /// Every agent starts at the origin.
    pub fn zeros(algorithm: Algorithm, agents: usize, dim: usize) -> Self {
        Self {
            x: Array2::zeros((agents, dim)),
            k: 0,
            algorithm,
            tracker: None,
            last_gradient: None,
            budget: Vec::new(),
        }
    }

    /// Whether every agent holds the same iterate.
    pub fn in_agreement(&self) -> bool {
        let first = self.x.row(0);
        self.x.rows().into_iter().all(|r| r == first)
    }
}

/// Errors and communication of a single step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub err_proj: f64,
    pub err_grad: f64,
    /// Rounds charged to the budget.
    pub rounds: u64,
    pub stats: CommStats,
}

/// Local (stochastic) gradients of every agent at iteration `k`.
pub fn stacked_gradient(problem: &Problem, k: usize, x: ArrayView2<'_, f64>, cfg: &RunConfig, seed: u64) -> Result<Array2<f64>> {
    let mut g = Array2::zeros(x.raw_dim());
    let gseed = derive_seed(seed, TAG_GRADIENT);
    for (i, mut row) in g.rows_mut().into_iter().enumerate() {
        let grad = match cfg.batch {
            None => problem.local_gradient(i, k, x.row(i)),
            Some(b) => {
                let mut rng = seeded_rng(gseed, i, k as u64);
                problem.stochastic_gradient(i, k, x.row(i), b, cfg.rescale_batch, &mut rng)?
            }
        };
        row.assign(&grad);
    }
    Ok(g)
}

fn exact_gradient(problem: &Problem, k: usize, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut g = Array2::zeros(x.raw_dim());
    for (i, mut row) in g.rows_mut().into_iter().enumerate() {
        row.assign(&problem.local_gradient(i, k, x.row(i)));
    }
    g
}

/// `|proj(y) - proj(x - alpha * exact gradient)|`.
fn gradient_error(problem: &Problem, state: &OptimizerState, y: &Array2<f64>, cfg: &RunConfig) -> f64 {
    if cfg.batch.is_none() {
        return 0.0;
    }
    let exact = &state.x - &(exact_gradient(problem, state.k, state.x.view()) * cfg.alpha);
    stacked_norm(&(project_consensus(y.view()) - project_consensus(exact.view())))
}

/// One FTQC-DGD iteration: local gradient step, then coordination.
pub fn ftqc_dgd_step(
    state: &mut OptimizerState,
    problem: &Problem,
    graph: &Digraph,
    cfg: &RunConfig,
    seed: u64,
) -> Result<StepDiagnostics> {
    let grad = stacked_gradient(problem, state.k, state.x.view(), cfg, seed)?;
    let y = &state.x - &(grad * cfg.alpha);
    let target = project_consensus(y.view());
    let err_grad = gradient_error(problem, state, &y, cfg);

    let (next, rounds, stats) = if cfg.exact_projection {
        (target.clone(), 1, CommStats::new(cfg.word_size))
    } else {
        let pseed = derive_seed(derive_seed(seed, TAG_PROTOCOL), state.k as u64);
        let out = ftqc::run_vector(y.view(), graph, &cfg.ftqc(graph), pseed)?;
        let rounds = if cfg.charge_votes {
            out.rounds_used()
        } else {
            out.token_rounds
        };
        let row = Array1::from(out.consensus);
        (broadcast_rows(&row, y.nrows()), rounds, out.stats)
    };

    let err_proj = stacked_norm(&(&next - &target));
    state.x = next;
    state.k += 1;
    state.budget.push(rounds);
    Ok(StepDiagnostics {
        err_proj,
        err_grad,
        rounds,
        stats,
    })
}

/// `R` rounds of quantized mixing: each agent keeps its own value exactly
/// and combines the quantized values received from its neighbors.
fn quantized_mix(
    x: &Array2<f64>,
    mix: &MixMatrix,
    rounds: u64,
    cfg: &RunConfig,
    net: &mut Network<'_>,
) -> Array2<f64> {
    let w = mix.weights();
    let diag: Array1<f64> = w.diag().to_owned();
    let mut off = w.clone();
    off.diag_mut().fill(0.0);
    let mut cur = x.clone();
    for _ in 0..rounds {
        let sent = cur.mapv(|v| quantize_with(cfg.quantizer, v, cfg.delta));
        let own = &cur * &diag.view().insert_axis(Axis(1));
        cur = off.dot(&sent) + own;
        net.account_broadcast_round(x.ncols() as u64);
    }
    cur
}

/// One quantized Near-DGD iteration with `budget` mixing rounds.
pub fn near_dgd_step(
    state: &mut OptimizerState,
    problem: &Problem,
    graph: &Digraph,
    mix: &MixMatrix,
    budget: u64,
    cfg: &RunConfig,
    seed: u64,
) -> Result<StepDiagnostics> {
    let grad = stacked_gradient(problem, state.k, state.x.view(), cfg, seed)?;
    let y = &state.x - &(grad * cfg.alpha);
    let err_grad = gradient_error(problem, state, &y, cfg);
    let rounds = budget.max(1);
    let mut net = Network::new(graph, cfg.word_size);
    let next = quantized_mix(&y, mix, rounds, cfg, &mut net);
    let err_proj = stacked_norm(&(&next - &project_consensus(y.view())));
    state.x = next;
    state.k += 1;
    state.budget.push(rounds);
    Ok(StepDiagnostics {
        err_proj,
        err_grad,
        rounds,
        stats: net.stats(),
    })
}

/// One quantized gradient-tracking iteration:
///
/// ```text
/// x+ = W^R1 (x - alpha g)
/// g+ = W^R2 g + grad_{k+1}(x+) - grad_k(x)
/// ```
///
/// with `R1 = ceil(R/2)` and `R2 = floor(R/2)`.
pub fn dgt_step(
    state: &mut OptimizerState,
    problem: &Problem,
    graph: &Digraph,
    mix: &MixMatrix,
    budget: u64,
    cfg: &RunConfig,
    seed: u64,
) -> Result<StepDiagnostics> {
    if state.tracker.is_none() {
        let g0 = stacked_gradient(problem, state.k, state.x.view(), cfg, seed)?;
        state.tracker = Some(g0.clone());
        state.last_gradient = Some(g0);
    }
    let tracker = state.tracker.take().expect("tracker initialized");
    let last = state.last_gradient.take().expect("gradient initialized");
    let rounds = budget.max(1);
    let (r_x, r_g) = (rounds.div_ceil(2), rounds / 2);

    let y = &state.x - &(&tracker * cfg.alpha);
    let err_grad = gradient_error(problem, state, &y, cfg);
    let mut net = Network::new(graph, cfg.word_size);
    let next = quantized_mix(&y, mix, r_x, cfg, &mut net);
    let err_proj = stacked_norm(&(&next - &project_consensus(y.view())));
    let grad_next = stacked_gradient(problem, state.k + 1, next.view(), cfg, seed)?;
    let mixed = quantized_mix(&tracker, mix, r_g, cfg, &mut net);

    state.tracker = Some(mixed + &grad_next - &last);
    state.last_gradient = Some(grad_next);
    state.x = next;
    state.k += 1;
    state.budget.push(rounds);
    Ok(StepDiagnostics {
        err_proj,
        err_grad,
        rounds,
        stats: net.stats(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Trace,
    /// Rounds charged per iteration.
    pub budget: Vec<u64>,
    pub state: OptimizerState,
}

/// Runs `horizon` iterations of `algorithm` from the origin.
///
/// Baselines need `budget` with at least `horizon` entries, normally the
/// [`RunOutput::budget`] of an FTQC-DGD run on the same seed.
pub fn run(
    algorithm: Algorithm,
    problem: &Problem,
    graph: &Digraph,
    cfg: &RunConfig,
    horizon: usize,
    seed: u64,
    budget: Option<&[u64]>,
) -> Result<RunOutput> {
    if graph.node_count() != problem.agents() {
        return Err(Error::DimensionMismatch {
            expected: problem.agents(),
            actual: graph.node_count(),
        });
    }
    if !(cfg.alpha > 0.0 && cfg.alpha.is_finite()) {
        return Err(Error::InvalidStepSize(cfg.alpha));
    }
    let mix = match algorithm {
        Algorithm::FtqcDgd => None,
        Algorithm::NearDgd | Algorithm::Dgt => {
            let available = budget.map_or(0, <[u64]>::len);
            if available < horizon {
                return Err(Error::MissingBudget {
                    algorithm: algorithm.name(),
                    needed: horizon,
                    available,
                });
            }
            Some(graph.metropolis_weights()?)
        }
    };

    let mut state = OptimizerState::zeros(algorithm, problem.agents(), problem.dim());
    let mut totals = CommStats::new(cfg.word_size);
    let mut records = Vec::with_capacity(horizon + 1);
    let tracking = |state: &OptimizerState| -> Result<f64> {
        let x_star = &problem.oracle(problem.epoch_of(state.k))?.x_star;
        Ok(stacked_norm(&(&state.x - &x_star.view().insert_axis(Axis(0)))))
    };

    let initial = tracking(&state).map_err(|e| e.at_iteration(0))?;
    let threshold = if initial > 0.0 {
        cfg.divergence_ratio * initial
    } else {
        ERROR_CAP
    };
    records.push(StepRecord {
        k: 0,
        epoch: problem.epoch_of(0),
        err: initial,
        err_proj: 0.0,
        err_grad: 0.0,
        rounds: 0,
        messages: 0,
        bits: 0,
        diverged: false,
    });

    let mut diverged = false;
    for k in 0..horizon {
        let diag = if diverged && records.last().is_some_and(|r| r.err >= ERROR_CAP) {
            // nothing left to learn from a blown-up run
            None
        } else {
            let step = match algorithm {
                Algorithm::FtqcDgd => ftqc_dgd_step(&mut state, problem, graph, cfg, seed),
                Algorithm::NearDgd => {
                    near_dgd_step(&mut state, problem, graph, mix.as_ref().unwrap(), budget.unwrap()[k], cfg, seed)
                }
                Algorithm::Dgt => {
                    dgt_step(&mut state, problem, graph, mix.as_ref().unwrap(), budget.unwrap()[k], cfg, seed)
                }
            };
            Some(step.map_err(|e| e.at_iteration(k))?)
        };

        let (err, err_proj, err_grad) = match diag {
            Some(d) => {
                totals.absorb(&d.stats);
                let err = tracking(&state).map_err(|e| e.at_iteration(k + 1))?;
                (err, d.err_proj, d.err_grad)
            }
            None => {
                state.k += 1;
                state.budget.push(0);
                (ERROR_CAP, ERROR_CAP, 0.0)
            }
        };
        let capped = |v: f64| if v.is_finite() && v < ERROR_CAP { v } else { ERROR_CAP };
        let err = capped(err);
        diverged |= err > threshold || err >= ERROR_CAP;
        records.push(StepRecord {
            k: k + 1,
            epoch: problem.epoch_of(k + 1),
            err,
            err_proj: capped(err_proj),
            err_grad: capped(err_grad),
            rounds: totals.rounds,
            messages: totals.messages,
            bits: totals.bits(),
            diverged,
        });
    }

    Ok(RunOutput {
        trace: Trace { records },
        budget: state.budget.clone(),
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{DataPoint, ProblemConfig};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quantizer_floor() {
        assert!((quantize(0.37, 0.1) - 0.3).abs() < 1e-15);
        assert!((quantize(-0.01, 0.1) + 0.1).abs() < 1e-15);
        assert!((quantize(0.5, 0.1) - 0.5).abs() < 1e-15);
        assert_eq!(quantize_with(QuantizerKind::Nearest, 0.37, 0.1), 0.4);
        assert_eq!(quantize_with(QuantizerKind::Floor, 0.37, 0.0), 0.37);
    }

    #[test]
    fn projection_basics() {
        let x = array![[0.0], [2.0]];
        assert_eq!(project_consensus(x.view()), array![[1.0], [1.0]]);
        let same = array![[1.0, -2.0], [1.0, -2.0], [1.0, -2.0]];
        assert_eq!(project_consensus(same.view()), same);
        let x = array![[0.3, 1.0], [-2.0, 4.0], [7.5, 0.1]];
        let once = project_consensus(x.view());
        assert_eq!(project_consensus(once.view()), once);
    }

    fn no_data_problem(agents: usize, dim: usize) -> Problem {
        let cfg = ProblemConfig {
            agents,
            dim,
            ..ProblemConfig::default()
        };
        Problem::from_data(cfg, vec![vec![Vec::<DataPoint>::new(); agents]]).unwrap()
    }

    #[test]
    fn origin_is_fixed_point_without_data() {
        let p = no_data_problem(4, 3);
        let g = Digraph::ring(4).unwrap();
        let mut state = OptimizerState::zeros(Algorithm::FtqcDgd, 4, 3);
        let cfg = RunConfig::new(0.1, 0.1);
        ftqc_dgd_step(&mut state, &p, &g, &cfg, 0).unwrap();
        assert_eq!(state.x, Array2::<f64>::zeros((4, 3)));
        assert!(state.in_agreement());
    }

    #[test]
    fn near_dgd_with_averaging_matrix_is_exact_projection() {
        let p = Problem::generate(ProblemConfig {
            agents: 4,
            dim: 3,
            samples: 5,
            ..ProblemConfig::default()
        })
        .unwrap();
        let g = Digraph::complete(4).unwrap();
        let mut mix = g.metropolis_weights().unwrap();
        assert!(mix.weights().iter().all(|&w| (w - 0.25).abs() < 1e-15));
        mix = MixMatrix::clone(&mix);
        let cfg = RunConfig::new(0.0, 0.05);
        let mut state = OptimizerState::zeros(Algorithm::NearDgd, 4, 3);
        state.x = array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.0], [0.5, 0.5, 0.5], [-0.2, 0.0, 0.9]];
        let grad = stacked_gradient(&p, 0, state.x.view(), &cfg, 0).unwrap();
        let expected = project_consensus((&state.x - &(grad * cfg.alpha)).view());
        near_dgd_step(&mut state, &p, &g, &mix, 1, &cfg, 0).unwrap();
        assert!((&state.x - &expected).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn baselines_need_a_budget() {
        let p = no_data_problem(3, 2);
        let g = Digraph::symmetric_ring(3).unwrap();
        let err = run(Algorithm::NearDgd, &p, &g, &RunConfig::new(0.1, 0.1), 5, 0, Some(&[1, 1])).unwrap_err();
        assert!(matches!(err, Error::MissingBudget { needed: 5, available: 2, .. }));
    }

    #[test]
    fn zero_horizon_has_initial_record_only() {
        let p = no_data_problem(3, 2);
        let g = Digraph::ring(3).unwrap();
        let out = run(Algorithm::FtqcDgd, &p, &g, &RunConfig::new(0.1, 0.1), 0, 0, None).unwrap();
        assert_eq!(out.trace.records.len(), 1);
        assert_eq!(out.trace.records[0].k, 0);
    }

    #[test]
    fn dgt_single_agent_is_quantized_gradient_descent() {
        let p = Problem::generate(ProblemConfig {
            agents: 1,
            dim: 3,
            samples: 6,
            ..ProblemConfig::default()
        })
        .unwrap();
        let g = Digraph::new(1, &[]).unwrap();
        let mix = g.metropolis_weights().unwrap();
        let cfg = RunConfig::new(0.01, 0.05);
        let mut state = OptimizerState::zeros(Algorithm::Dgt, 1, 3);
        let mut x = Array1::<f64>::zeros(3);
        for k in 0..20 {
            dgt_step(&mut state, &p, &g, &mix, 3, &cfg, 0).unwrap();
            // with one agent the tracker equals the gradient and nothing is sent
            x = &x - &(p.local_gradient(0, k, x.view()) * cfg.alpha);
            assert!((&state.x.row(0) - &x).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn trace_csv_round_trip() {
        let p = Problem::generate(ProblemConfig {
            agents: 3,
            dim: 2,
            samples: 4,
            ..ProblemConfig::default()
        })
        .unwrap();
        let g = Digraph::ring(3).unwrap();
        let alpha = p.curvature_bounds().optimal_step();
        let out = run(Algorithm::FtqcDgd, &p, &g, &RunConfig::new(0.01, alpha), 5, 2, None).unwrap();
        let csv = out.trace.to_csv(None);
        assert!(csv.starts_with(Trace::CSV_HEADER));
        assert_eq!(Trace::from_csv(&csv).unwrap(), out.trace);
    }

    #[test]
    fn stochastic_gradient_uses_batches() {
        let p = Problem::generate(ProblemConfig::default()).unwrap();
        let cfg = RunConfig {
            batch: Some(10),
            ..RunConfig::new(0.1, 0.01)
        };
        let x = Array2::from_elem((10, 16), 0.05);
        let a = stacked_gradient(&p, 0, x.view(), &cfg, 1).unwrap();
        let b = stacked_gradient(&p, 0, x.view(), &cfg, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, exact_gradient(&p, 0, x.view()));
        let _ = ChaCha8Rng::seed_from_u64(0);
    }
}
