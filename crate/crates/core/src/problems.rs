//! Time-varying distributed logistic regression.
//!
//! Agent `i` at epoch `j` holds `(a, b)` pairs and the local cost
//!
//! ```text
//! f_ij(x) = s * sum_h log(1 + exp(-b_h a_h x)) + (eps / 2) |x|^2
//! ```
//!
//! with `s = 1` (plain sum, the default) or `s = 1 / m_i` (averaged form).
//! Features and label noise are fixed per agent; the labeling hyperplane
//! drifts by `drift_scale` per epoch, so labels near the boundary flip as the
//! epochs advance.

use std::fmt::Write as _;
use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::simnet::{derive_seed, seeded_rng};

const TAG_TRUTH: u64 = 0x7472_7574;
const TAG_DRIFT: u64 = 0x6472_6966;
const TAG_DATA: u64 = 0x6461_7461;

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(u))` without overflow.
#[inline]
pub fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    /// Feature row; the last entry is the intercept `1`.
    pub features: Vec<f64>,
    /// `+1` or `-1`.
    pub label: f64,
}

/// One agent's samples at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalData {
    pub features: Array2<f64>,
    pub labels: Array1<f64>,
}

impl LocalData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = DataPoint> + '_ {
        self.features.rows().into_iter().zip(self.labels.iter()).map(|(a, &b)| DataPoint {
            features: a.to_vec(),
            label: b,
        })
    }

    fn from_points(points: &[DataPoint], dim: usize) -> Result<Self> {
        let mut features = Array2::zeros((points.len(), dim));
        let mut labels = Array1::zeros(points.len());
        for (h, p) in points.iter().enumerate() {
            if p.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: p.features.len(),
                });
            }
            features.row_mut(h).assign(&ArrayView1::from(&p.features));
            labels[h] = p.label;
        }
        Ok(Self { features, labels })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostForm {
    /// Plain sum over samples.
    #[default]
    Sum,
    /// Sum scaled by `1 / m_i`.
    Averaged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub agents: usize,
    pub dim: usize,
    pub samples: usize,
    pub epsilon: f64,
    /// Iterations between cost changes.
    pub change_period: usize,
    pub drift_scale: f64,
    /// Number of epochs to materialize.
    pub epochs: usize,
    pub seed: u64,
    pub cost_form: CostForm,
    pub label_noise: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            agents: 10,
            dim: 16,
            samples: 20,
            epsilon: 5.0,
            change_period: usize::MAX,
            drift_scale: 0.0,
            epochs: 1,
            seed: 0,
            cost_form: CostForm::Sum,
            label_noise: 0.1,
        }
    }
}

impl ProblemConfig {
    /// Sets `epochs` to cover the steps `0..horizon`. The record after the
    /// last step is measured against the final epoch.
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.epochs = horizon.div_ceil(self.change_period.max(1)).max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents == 0 || self.dim == 0 || self.change_period == 0 || self.epochs == 0 {
            return Err(Error::InvalidBoundParams(
                "problem dimensions, change period and epoch count must be positive".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidCurvature {
                lower: self.epsilon,
                upper: self.epsilon,
            });
        }
        Ok(())
    }
}

/// Strong convexity and smoothness constants of the local costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    pub lower: f64,
    pub upper: f64,
}

impl Curvature {
    /// `2 / (lower + upper)`, the step minimizing the contraction factor.
    pub fn optimal_step(&self) -> f64 {
        2.0 / (self.lower + self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x_star: Array1<f64>,
    pub gradient_norm: f64,
    pub epoch: usize,
    pub iterations: usize,
}

#[derive(Debug)]
pub struct Problem {
    config: ProblemConfig,
    /// `data[epoch][agent]`
    data: Vec<Vec<LocalData>>,
    oracle: Vec<OnceLock<OracleSolution>>,
    oracle_tol: f64,
}

impl Clone for Problem {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            data: self.data.clone(),
            oracle: self
                .oracle
                .iter()
                .map(|c| c.get().cloned().map(OnceLock::from).unwrap_or_default())
                .collect(),
            oracle_tol: self.oracle_tol,
        }
    }
}

impl Problem {
    pub const DEFAULT_ORACLE_TOL: f64 = 1e-10;
    const ORACLE_MAX_ITERATIONS: usize = 1_000_000;

    /// Generates the synthetic instance described by `config`.
    pub fn generate(config: ProblemConfig) -> Result<Self> {
        config.validate()?;
        let n = config.dim;
        let truth_seed = derive_seed(config.seed, TAG_TRUTH);
        let drift_seed = derive_seed(config.seed, TAG_DRIFT);
        let data_seed = derive_seed(config.seed, TAG_DATA);

        let mut rng = seeded_rng(truth_seed, 0, 0);
        let mut truth: Array1<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut truths = vec![truth.clone()];
        for epoch in 1..config.epochs {
            if config.drift_scale != 0.0 {
                let mut rng = seeded_rng(drift_seed, 0, epoch as u64);
                let dir: Array1<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = dir.dot(&dir).sqrt();
                truth = &truth + &(dir * (config.drift_scale / norm));
            }
            truths.push(truth.clone());
        }

        // features and label noise are a function of (seed, agent) only
        let base: Vec<(Array2<f64>, Array1<f64>)> = (0..config.agents)
            .map(|i| {
                let mut rng = seeded_rng(data_seed, i, 0);
                let mut a = Array2::zeros((config.samples, n));
                let mut noise = Array1::zeros(config.samples);
                for h in 0..config.samples {
                    for c in 0..n - 1 {
                        a[[h, c]] = rng.sample(StandardNormal);
                    }
                    a[[h, n - 1]] = 1.0;
                    noise[h] = config.label_noise * rng.sample::<f64, _>(StandardNormal);
                }
                (a, noise)
            })
            .collect();

        let data = truths
            .iter()
            .map(|w| {
                base.iter()
                    .map(|(a, noise)| {
                        let scores = a.dot(w) + noise;
                        LocalData {
                            features: a.clone(),
                            labels: scores.mapv(|s| if s >= 0.0 { 1.0 } else { -1.0 }),
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self::from_parts(config, data))
    }

    fn from_parts(config: ProblemConfig, data: Vec<Vec<LocalData>>) -> Self {
        let oracle = (0..data.len()).map(|_| OnceLock::new()).collect();
        Self {
            config,
            data,
            oracle,
            oracle_tol: Self::DEFAULT_ORACLE_TOL,
        }
    }

    /// Builds a problem from explicit per-epoch, per-agent samples.
    pub fn from_data(config: ProblemConfig, data: Vec<Vec<Vec<DataPoint>>>) -> Result<Self> {
        let epochs = data
            .into_iter()
            .map(|agents| {
                if agents.len() != config.agents {
                    return Err(Error::DimensionMismatch {
                        expected: config.agents,
                        actual: agents.len(),
                    });
                }
                agents.iter().map(|pts| LocalData::from_points(pts, config.dim)).collect()
            })
            .collect::<Result<Vec<Vec<LocalData>>>>()?;
        let config = ProblemConfig {
            epochs: epochs.len(),
            ..config
        };
        config.validate()?;
        Ok(Self::from_parts(config, epochs))
    }

    pub fn with_oracle_tolerance(mut self, tol: f64) -> Self {
        self.oracle_tol = tol;
        self
    }

    pub fn config(&self) -> &ProblemConfig {
        &self.config
    }

    pub fn agents(&self) -> usize {
        self.config.agents
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn epoch_count(&self) -> usize {
        self.data.len()
    }

    /// Epoch active at iteration `k`; clamps to the last materialized epoch.
    pub fn epoch_of(&self, k: usize) -> usize {
        (k / self.config.change_period).min(self.data.len() - 1)
    }

    pub fn local_data(&self, agent: usize, epoch: usize) -> &LocalData {
        &self.data[epoch][agent]
    }

    fn scale(&self, data: &LocalData) -> f64 {
        match self.config.cost_form {
            CostForm::Sum => 1.0,
            CostForm::Averaged if data.is_empty() => 1.0,
            CostForm::Averaged => 1.0 / data.len() as f64,
        }
    }

    /// `f_{i,k}(x)` with `k` an iteration index.
    pub fn local_cost(&self, agent: usize, k: usize, x: ArrayView1<'_, f64>) -> f64 {
        let data = self.local_data(agent, self.epoch_of(k));
        let margins = data.features.dot(&x) * &data.labels;
        self.scale(data) * margins.iter().map(|&m| softplus(-m)).sum::<f64>()
            + 0.5 * self.config.epsilon * x.dot(&x)
    }

    /// Exact local gradient at iteration `k`.
    pub fn local_gradient(&self, agent: usize, k: usize, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.epoch_gradient(agent, self.epoch_of(k), x)
    }

    /// Exact local gradient of the cost active during `epoch`.
    pub fn epoch_gradient(&self, agent: usize, epoch: usize, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let data = self.local_data(agent, epoch);
        let mut g = x.to_owned() * self.config.epsilon;
        let scale = self.scale(data);
        for (a, &b) in data.features.rows().into_iter().zip(data.labels.iter()) {
            let weight = -b * sigmoid(-b * a.dot(&x)) * scale;
            g.scaled_add(weight, &a);
        }
        g
    }

    /// Mini-batch gradient over `batch` samples drawn without replacement.
    /// The data term is the plain sum over the batch unless `rescale` is set,
    /// in which case it is multiplied by `m_i / batch`.
    pub fn stochastic_gradient<R: Rng + ?Sized>(
        &self,
        agent: usize,
        k: usize,
        x: ArrayView1<'_, f64>,
        batch: usize,
        rescale: bool,
        rng: &mut R,
    ) -> Result<Array1<f64>> {
        self.epoch_stochastic_gradient(agent, self.epoch_of(k), x, batch, rescale, rng)
    }

    pub fn epoch_stochastic_gradient<R: Rng + ?Sized>(
        &self,
        agent: usize,
        epoch: usize,
        x: ArrayView1<'_, f64>,
        batch: usize,
        rescale: bool,
        rng: &mut R,
    ) -> Result<Array1<f64>> {
        let data = self.local_data(agent, epoch);
        let m = data.len();
        if batch == 0 || batch > m {
            return Err(Error::InvalidBatch { batch, samples: m });
        }
        if batch == m {
            return Ok(self.epoch_gradient(agent, epoch, x));
        }
        let mut scale = self.scale(data);
        if rescale {
            scale *= m as f64 / batch as f64;
        }
        let mut g = x.to_owned() * self.config.epsilon;
        for h in rand::seq::index::sample(rng, m, batch) {
            let a = data.features.row(h);
            let b = data.labels[h];
            g.scaled_add(-b * sigmoid(-b * a.dot(&x)) * scale, &a);
        }
        Ok(g)
    }

    /// Hessian of the local cost, for curvature checks.
    pub fn local_hessian(&self, agent: usize, k: usize, x: ArrayView1<'_, f64>) -> Array2<f64> {
        let data = self.local_data(agent, self.epoch_of(k));
        let n = self.dim();
        let mut h = Array2::eye(n) * self.config.epsilon;
        let scale = self.scale(data);
        for (a, &b) in data.features.rows().into_iter().zip(data.labels.iter()) {
            let s = sigmoid(-b * a.dot(&x));
            let w = s * (1.0 - s) * scale;
            let col = a.insert_axis(Axis(1));
            h.scaled_add(w, &col.dot(&col.t()));
        }
        h
    }

    /// Curvature of the local costs at epoch `epoch`: strong convexity
    /// `eps`, smoothness `eps + max_i s * sum_h |a_h|^2 / 4`.
    pub fn curvature(&self, epoch: usize) -> Curvature {
        let upper = self.data[epoch]
            .iter()
            .map(|d| 0.25 * self.scale(d) * d.features.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max);
        Curvature {
            lower: self.config.epsilon,
            upper: self.config.epsilon + upper,
        }
    }

    /// Curvature valid for every materialized epoch.
    pub fn curvature_bounds(&self) -> Curvature {
        (0..self.epoch_count())
            .map(|e| self.curvature(e))
            .fold(self.curvature(0), |acc, c| Curvature {
                lower: acc.lower.min(c.lower),
                upper: acc.upper.max(c.upper),
            })
    }

    /// Gradient of the aggregate cost `sum_i f_i` at epoch `epoch`.
    pub fn aggregate_gradient(&self, epoch: usize, x: ArrayView1<'_, f64>) -> Array1<f64> {
        (0..self.agents()).fold(Array1::zeros(self.dim()), |acc, i| acc + self.epoch_gradient(i, epoch, x))
    }

    /// Minimizes the aggregate cost of `epoch` by gradient descent with step
    /// `2 / (lower + upper)` of the aggregate curvature.
    pub fn solve_centralized(&self, epoch: usize, tol: f64) -> Result<OracleSolution> {
        let agents = self.agents() as f64;
        let lower = agents * self.config.epsilon;
        let upper: f64 = self.data[epoch]
            .iter()
            .map(|d| 0.25 * self.scale(d) * d.features.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            + lower;
        let step = 2.0 / (lower + upper);
        let mut x = Array1::zeros(self.dim());
        let mut best = f64::INFINITY;
        for iterations in 0..=Self::ORACLE_MAX_ITERATIONS {
            let g = self.aggregate_gradient(epoch, x.view());
            let norm = g.dot(&g).sqrt();
            best = best.min(norm);
            if norm <= tol {
                return Ok(OracleSolution {
                    x_star: x,
                    gradient_norm: norm,
                    epoch,
                    iterations,
                });
            }
            x.scaled_add(-step, &g);
        }
        Err(Error::OracleFailure {
            epoch,
            gradient_norm: best,
            iterations: Self::ORACLE_MAX_ITERATIONS,
        })
    }

    /// Cached oracle solution for `epoch`.
    pub fn oracle(&self, epoch: usize) -> Result<&OracleSolution> {
        let cell = &self.oracle[epoch];
        if let Some(sol) = cell.get() {
            return Ok(sol);
        }
        let sol = self.solve_centralized(epoch, self.oracle_tol)?;
        Ok(cell.get_or_init(|| sol))
    }

    /// Largest stacked distance `sqrt(N) |x*_j - x*_{j-1}|` between
    /// consecutive epochs.
    pub fn sigma_bound(&self) -> Result<f64> {
        let mut sigma: f64 = 0.0;
        for epoch in 1..self.epoch_count() {
            let d = &self.oracle(epoch)?.x_star - &self.oracle(epoch - 1)?.x_star;
            sigma = sigma.max(d.dot(&d).sqrt() * (self.agents() as f64).sqrt());
        }
        Ok(sigma)
    }

    /// Mean stacked stochastic gradient error `|grad_hat F - grad F|` over
    /// `draws` draws, evaluated at the epoch optima in rotation.
    pub fn estimate_tau(&self, batch: usize, rescale: bool, draws: usize, seed: u64) -> Result<f64> {
        if draws == 0 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for d in 0..draws {
            let epoch = d % self.epoch_count();
            let x = self.oracle(epoch)?.x_star.view();
            let mut sq = 0.0;
            for i in 0..self.agents() {
                let mut rng = seeded_rng(seed, i, d as u64);
                let m = self.local_data(i, epoch).len();
                let diff = self.epoch_stochastic_gradient(i, epoch, x, batch.min(m), rescale, &mut rng)?
                    - self.epoch_gradient(i, epoch, x);
                sq += diff.dot(&diff);
            }
            total += sq.sqrt();
        }
        Ok(total / draws as f64)
    }

    /// CSV dump: `agent,epoch,a0,...,a{n-1},label`, one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent,epoch");
        for c in 0..self.dim() {
            let _ = write!(out, ",a{c}");
        }
        out.push_str(",label\n");
        for (epoch, agents) in self.data.iter().enumerate() {
            for (agent, data) in agents.iter().enumerate() {
                for p in data.points() {
                    let _ = write!(out, "{agent},{epoch}");
                    for v in &p.features {
                        let _ = write!(out, ",{v}");
                    }
                    let _ = writeln!(out, ",{}", p.label);
                }
            }
        }
        out
    }

    /// Loads a CSV written by [`Problem::to_csv`]. Dimensions, agent and
    /// epoch counts come from the file; the rest from `config`.
    pub fn from_csv(text: &str, config: ProblemConfig) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty dataset file".into(),
        })?;
        let dim = header.split(',').count().checked_sub(3).filter(|&d| d > 0).ok_or(Error::Parse {
            line: 1,
            message: "header must be agent,epoch,features...,label".into(),
        })?;
        let mut data: Vec<Vec<Vec<DataPoint>>> = Vec::new();
        for (idx, line) in lines {
            let bad = |message: String| Error::Parse { line: idx + 1, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim + 3 {
                return Err(bad(format!("expected {} fields, got {}", dim + 3, fields.len())));
            }
            let agent: usize = fields[0].parse().map_err(|e| bad(format!("agent: {e}")))?;
            let epoch: usize = fields[1].parse().map_err(|e| bad(format!("epoch: {e}")))?;
            let nums = fields[2..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| bad(format!("{f:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            let label = nums[dim];
            if label != 1.0 && label != -1.0 {
                return Err(bad(format!("label must be +1 or -1, got {label}")));
            }
            if data.len() <= epoch {
                data.resize(epoch + 1, Vec::new());
            }
            if data[epoch].len() <= agent {
                data[epoch].resize(agent + 1, Vec::new());
            }
            data[epoch][agent].push(DataPoint {
                features: nums[..dim].to_vec(),
                label,
            });
        }
        let agents = data.iter().map(Vec::len).max().unwrap_or(0);
        for epoch in data.iter_mut() {
            epoch.resize(agents, Vec::new());
        }
        let samples = data.first().and_then(|e| e.first()).map_or(0, Vec::len);
        Self::from_data(
            ProblemConfig {
                agents,
                dim,
                samples,
                ..config
            },
            data,
        )
    }
}
