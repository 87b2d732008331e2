//! Experiment configuration files.
//!
//! A config is TOML with three optional tables:
//!
//! ```toml
//! [topology]
//! kind = "ring-chords"   # ring, symmetric-ring, complete, ring-chords, random, file
//! agents = 10
//! chords = 5
//! seed = 7
//!
//! [problem]
//! dim = 16
//! samples = 20
//! epsilon = 5.0
//! change_period = 100    # omit for a static problem
//! drift_scale = 8.0
//!
//! [run]
//! algorithms = ["ftqc-dgd", "near-dgd", "dgt"]
//! deltas = [0.01]
//! batch_sizes = [10, 20] # omit for exact gradients
//! horizon = 1000
//! seeds = 20             # or an explicit list
//! ```
//!
//! Unknown keys are rejected. Validation errors point at the offending line.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ftqc_core::optimizers::StepSizePolicy;
use ftqc_core::problems::CostForm;
use ftqc_core::{Algorithm, Digraph, ProblemConfig, QuantizerKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}{message}", line_prefix(*.line))]
    Parse { line: Option<usize>, message: String },
    #[error("{}invalid `{key}`: {message}", line_prefix(*.line))]
    Invalid {
        line: Option<usize>,
        key: String,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ConfigError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Parse { line, .. } | ConfigError::Invalid { line, .. } => *line,
            ConfigError::Io { .. } => None,
        }
    }
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    Ring,
    SymmetricRing,
    Complete,
    #[default]
    RingChords,
    Random,
    File,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub agents: usize,
    /// Extra symmetric chords for `ring-chords`, extra arcs for `random`.
    pub chords: usize,
    pub seed: u64,
    pub path: Option<PathBuf>,
    pub diameter_bound: Option<usize>,
}

impl Default for TopologySpec {
    fn default() -> Self {
        Self {
            kind: TopologyKind::RingChords,
            agents: 10,
            chords: 5,
            seed: 7,
            path: None,
            diameter_bound: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSpec {
    pub dim: usize,
    pub samples: usize,
    pub epsilon: f64,
    pub change_period: Option<usize>,
    pub drift_scale: f64,
    pub label_noise: f64,
    /// `sum` or `averaged`.
    pub cost_form: String,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        let d = ProblemConfig::default();
        Self {
            dim: d.dim,
            samples: d.samples,
            epsilon: d.epsilon,
            change_period: None,
            drift_scale: d.drift_scale,
            label_noise: d.label_noise,
            cost_form: "sum".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StepSpec {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub algorithms: Option<Vec<String>>,
    pub deltas: Option<Vec<f64>>,
    pub batch_sizes: Option<Vec<usize>>,
    pub horizon: usize,
    pub seeds: SeedSpec,
    pub step_size: StepSpec,
    pub rescale_batch: bool,
    pub quantizer: String,
    pub charge_votes: bool,
    pub word_size: u32,
    pub max_rounds: u64,
    /// Adds the theoretical bound as an extra trace column.
    pub bound: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            algorithms: None,
            deltas: None,
            batch_sizes: None,
            horizon: 1000,
            seeds: SeedSpec::Count(20),
            step_size: StepSpec::Named("optimal-contraction".into()),
            rescale_batch: false,
            quantizer: "floor".into(),
            charge_votes: true,
            word_size: 32,
            max_rounds: 100_000,
            bound: false,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    pub problem: ProblemSpec,
    pub run: RunSpec,
}

/// Fallbacks a subcommand supplies for keys the file leaves out.
#[derive(Debug, Clone)]
pub struct Defaults {
    pub algorithms: Vec<Algorithm>,
    pub deltas: Vec<f64>,
    pub batches: Vec<Option<usize>>,
}

/// Command-line overrides.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seeds: Option<u64>,
}

/// A validated, fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub graph: Digraph,
    /// Problem template; the seed is set per run.
    pub problem: ProblemConfig,
    pub algorithms: Vec<Algorithm>,
    pub deltas: Vec<f64>,
    /// `None` is the exact gradient.
    pub batches: Vec<Option<usize>>,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub step: StepSizePolicy,
    pub rescale_batch: bool,
    pub quantizer: QuantizerKind,
    pub charge_votes: bool,
    pub word_size: u32,
    pub max_rounds: u64,
    pub bound: bool,
    /// Whether the problem changes within the horizon.
    pub is_online: bool,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Ok((Self::parse(&text)?, text))
    }

    /// Validates every field and builds the topology. `text` is the source
    /// the config was parsed from, used to report line numbers.
    pub fn resolve(&self, text: &str, defaults: &Defaults, overrides: Overrides) -> Result<Experiment, ConfigError> {
        let invalid = |section: &str, key: &str, message: String| ConfigError::Invalid {
            line: locate(text, section, key),
            key: format!("{section}.{key}"),
            message,
        };
        let (p, r) = (&self.problem, &self.run);

        let algorithms = match &r.algorithms {
            None => defaults.algorithms.clone(),
            Some(names) => names
                .iter()
                .map(|n| Algorithm::from_str(n).map_err(|m| invalid("run", "algorithms", m)))
                .collect::<Result<Vec<_>, _>>()?,
        };
        if algorithms.is_empty() {
            return Err(invalid("run", "algorithms", "at least one algorithm is required".into()));
        }

        let deltas = r.deltas.clone().unwrap_or_else(|| defaults.deltas.clone());
        if deltas.is_empty() {
            return Err(invalid("run", "deltas", "at least one quantization level is required".into()));
        }
        if let Some(d) = deltas.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(invalid("run", "deltas", format!("quantization level {d} must be positive")));
        }

        if p.dim == 0 {
            return Err(invalid("problem", "dim", "must be at least 1".into()));
        }
        if p.samples == 0 {
            return Err(invalid("problem", "samples", "must be at least 1".into()));
        }
        if !(p.epsilon.is_finite() && p.epsilon > 0.0) {
            return Err(invalid("problem", "epsilon", format!("{} must be positive", p.epsilon)));
        }
        if !(p.drift_scale.is_finite() && p.drift_scale >= 0.0) {
            return Err(invalid("problem", "drift_scale", format!("{} must be nonnegative", p.drift_scale)));
        }
        if !(p.label_noise.is_finite() && p.label_noise >= 0.0) {
            return Err(invalid("problem", "label_noise", format!("{} must be nonnegative", p.label_noise)));
        }
        if p.change_period == Some(0) {
            return Err(invalid("problem", "change_period", "must be at least 1".into()));
        }
        let cost_form = match p.cost_form.as_str() {
            "sum" => CostForm::Sum,
            "averaged" => CostForm::Averaged,
            other => {
                return Err(invalid("problem", "cost_form", format!("{other:?} is not `sum` or `averaged`")));
            }
        };

        let batches = match &r.batch_sizes {
            None => defaults.batches.clone(),
            Some(b) => b.iter().map(|&b| Some(b)).collect(),
        };
        if let Some(b) = batches.iter().flatten().find(|&&b| b == 0 || b > p.samples) {
            return Err(invalid(
                "run",
                "batch_sizes",
                format!("batch size {b} outside [1, {}]", p.samples),
            ));
        }
        if batches.is_empty() {
            return Err(invalid("run", "batch_sizes", "at least one batch size is required".into()));
        }

        if r.horizon == 0 {
            return Err(invalid("run", "horizon", "must be at least 1".into()));
        }
        let seeds: Vec<u64> = match (overrides.seeds, &r.seeds) {
            (Some(n), _) | (None, &SeedSpec::Count(n)) => (0..n).collect(),
            (None, SeedSpec::List(list)) => list.clone(),
        };
        if seeds.is_empty() {
            return Err(invalid("run", "seeds", "at least one seed is required".into()));
        }
        let step = match &r.step_size {
            StepSpec::Fixed(a) if a.is_finite() && *a > 0.0 => StepSizePolicy::Fixed(*a),
            StepSpec::Fixed(a) => return Err(invalid("run", "step_size", format!("{a} must be positive"))),
            StepSpec::Named(n) if n == "optimal-contraction" => StepSizePolicy::OptimalContraction,
            StepSpec::Named(n) if n == "min-asymptotic-bound" => StepSizePolicy::MinAsymptoticBound,
            StepSpec::Named(n) => {
                return Err(invalid(
                    "run",
                    "step_size",
                    format!("{n:?} is not a number, `optimal-contraction` or `min-asymptotic-bound`"),
                ));
            }
        };
        let quantizer = match r.quantizer.as_str() {
            "floor" => QuantizerKind::Floor,
            "nearest" => QuantizerKind::Nearest,
            other => return Err(invalid("run", "quantizer", format!("{other:?} is not `floor` or `nearest`"))),
        };
        if r.word_size == 0 {
            return Err(invalid("run", "word_size", "must be at least 1".into()));
        }
        if r.max_rounds == 0 {
            return Err(invalid("run", "max_rounds", "must be at least 1".into()));
        }

        let graph = self.build_graph(text)?;
        let needs_mixing = algorithms.iter().any(|a| *a != Algorithm::FtqcDgd);
        if needs_mixing && !graph.is_symmetric() {
            return Err(invalid(
                "topology",
                "kind",
                "the baselines need a symmetric topology for doubly stochastic mixing".into(),
            ));
        }

        let change_period = p.change_period.unwrap_or(usize::MAX);
        let problem = ProblemConfig {
            agents: graph.node_count(),
            dim: p.dim,
            samples: p.samples,
            epsilon: p.epsilon,
            change_period,
            drift_scale: p.drift_scale,
            label_noise: p.label_noise,
            cost_form,
            ..ProblemConfig::default()
        }
        .with_horizon(r.horizon);

        Ok(Experiment {
            graph,
            problem,
            algorithms,
            deltas,
            batches,
            horizon: r.horizon,
            seeds,
            step,
            rescale_batch: r.rescale_batch,
            quantizer,
            charge_votes: r.charge_votes,
            word_size: r.word_size,
            max_rounds: r.max_rounds,
            bound: r.bound,
            is_online: change_period < r.horizon,
        })
    }

    fn build_graph(&self, text: &str) -> Result<Digraph, ConfigError> {
        let t = &self.topology;
        let invalid = |key: &str, message: String| ConfigError::Invalid {
            line: locate(text, "topology", key),
            key: format!("topology.{key}"),
            message,
        };
        if t.kind != TopologyKind::File && t.agents == 0 {
            return Err(invalid("agents", "must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
        let graph = match t.kind {
            TopologyKind::Ring => Digraph::ring(t.agents),
            TopologyKind::SymmetricRing => Digraph::symmetric_ring(t.agents),
            TopologyKind::Complete => Digraph::complete(t.agents),
            TopologyKind::RingChords => Digraph::ring_with_chords(t.agents, t.chords, &mut rng),
            TopologyKind::Random => Digraph::random_strongly_connected(t.agents, t.chords, &mut rng),
            TopologyKind::File => {
                let path = t.path.as_ref().ok_or_else(|| invalid("path", "required for kind = \"file\"".into()))?;
                Digraph::read_edge_list(path)
            }
        }
        .map_err(|e| invalid("kind", e.to_string()))?;
        match t.diameter_bound {
            Some(d) => graph.with_diameter_bound(d).map_err(|e| invalid("diameter_bound", e.to_string())),
            None => Ok(graph),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line number of `key = ...` inside `[section]`, if present.
pub fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(idx + 1);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> Defaults {
        Defaults {
            algorithms: vec![Algorithm::FtqcDgd],
            deltas: vec![0.01],
            batches: vec![None],
        }
    }

    #[test]
    fn empty_config_uses_defaults() {
        let exp = ExperimentConfig::parse("").unwrap().resolve("", &defaults(), Overrides::default()).unwrap();
        assert_eq!(exp.graph.node_count(), 10);
        assert_eq!(exp.seeds.len(), 20);
        assert_eq!(exp.horizon, 1000);
        assert!(!exp.is_online);
        assert_eq!(exp.problem.epochs, 1);
    }

    #[test]
    fn negative_delta_reports_line() {
        let text = "[topology]\nagents = 4\n\n[run]\nhorizon = 10\ndeltas = [-1.0]\n";
        let err = ExperimentConfig::parse(text)
            .unwrap()
            .resolve(text, &defaults(), Overrides::default())
            .unwrap_err();
        assert_eq!(err.line(), Some(6));
        assert!(err.to_string().contains("run.deltas"), "{err}");
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let text = "[run]\nhorizon = 10\ndelta = [0.1]\n";
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert_eq!(err.line(), Some(3));
        assert!(err.to_string().contains("delta"));
    }

    #[test]
    fn batch_out_of_range() {
        let text = "[problem]\nsamples = 8\n[run]\nbatch_sizes = [4, 9]\n";
        let err = ExperimentConfig::parse(text)
            .unwrap()
            .resolve(text, &defaults(), Overrides::default())
            .unwrap_err();
        assert_eq!(err.line(), Some(4));
    }

    #[test]
    fn seeds_list_and_override() {
        let text = "[run]\nseeds = [3, 5]\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.resolve(text, &defaults(), Overrides::default()).unwrap().seeds, vec![3, 5]);
        let over = Overrides { seeds: Some(2) };
        assert_eq!(cfg.resolve(text, &defaults(), over).unwrap().seeds, vec![0, 1]);
    }

    #[test]
    fn baselines_need_symmetric_graph() {
        let text = "[topology]\nkind = \"ring\"\nagents = 5\n[run]\nalgorithms = [\"near-dgd\"]\n";
        let err = ExperimentConfig::parse(text)
            .unwrap()
            .resolve(text, &defaults(), Overrides::default())
            .unwrap_err();
        assert_eq!(err.line(), Some(2));
    }

    #[test]
    fn online_problem_epochs() {
        let text = "[problem]\nchange_period = 100\ndrift_scale = 1.0\n[run]\nhorizon = 500\n";
        let exp = ExperimentConfig::parse(text)
            .unwrap()
            .resolve(text, &defaults(), Overrides::default())
            .unwrap();
        assert!(exp.is_online);
        assert_eq!(exp.problem.epochs, 5);
    }

    #[test]
    fn step_size_forms() {
        for (text, expected) in [
            ("[run]\nstep_size = 0.01\n", StepSizePolicy::Fixed(0.01)),
            ("[run]\nstep_size = \"min-asymptotic-bound\"\n", StepSizePolicy::MinAsymptoticBound),
        ] {
            let exp = ExperimentConfig::parse(text)
                .unwrap()
                .resolve(text, &defaults(), Overrides::default())
                .unwrap();
            assert_eq!(exp.step, expected);
        }
        let text = "[run]\nstep_size = \"fast\"\n";
        assert!(ExperimentConfig::parse(text)
            .unwrap()
            .resolve(text, &defaults(), Overrides::default())
            .is_err());
    }
}
