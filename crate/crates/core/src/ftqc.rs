//! Finite-time quantized coordination.
//!
//! Each agent quantizes its value to `y = 2 * floor(x / delta)` and holds two
//! tokens (`z = 2`). Every token round an agent absorbs the tokens it
//! received, splits its mass into `z` near-equal integer tokens, keeps one
//! and sends the others to uniformly random out-neighbors. Every `D` token
//! rounds the agents vote: each computes `ceil(y / z)` and `floor(y / z)` and
//! runs `D` rounds of max/min flooding. Once the global spread is at most one
//! level, every agent terminates with `delta * min floor`, which lies within
//! `2 * delta` below the true average.
//!
//! Vector inputs run one independent instance per component on a shared
//! round clock; a vote covers all components at once.

use std::sync::Arc;

use ndarray::ArrayView2;
use rand::Rng;

use crate::digraph::Digraph;
use crate::error::{Error, Result};
use crate::simnet::{seeded_rng, CommStats, Message, Network, Payload, VoteBounds};

/// `floor(a / b)` for `b > 0`.
#[inline]
pub fn floor_div(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    a.div_euclid(b)
}

/// `ceil(a / b)` for `b > 0`.
#[inline]
pub fn ceil_div(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    -(-a).div_euclid(b)
}

/// Largest `|x / delta|` accepted by the quantizer; keeps token masses exact.
const MAX_LEVEL: f64 = (1u64 << 52) as f64;

/// `floor(x / delta)` as an exact integer level.
pub fn quantize_level(x: f64, delta: f64) -> Result<i64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidQuantization(delta));
    }
    let level = (x / delta).floor();
    if !level.is_finite() || level.abs() > MAX_LEVEL {
        return Err(Error::QuantizationOverflow { value: x, delta });
    }
    Ok(level as i64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtqcConfig {
    pub delta: f64,
    pub diameter_bound: usize,
    pub max_rounds: u64,
    pub word_size: u32,
}

impl FtqcConfig {
    pub const DEFAULT_MAX_ROUNDS: u64 = 100_000;

    pub fn new(delta: f64, diameter_bound: usize) -> Self {
        Self {
            delta,
            diameter_bound,
            max_rounds: Self::DEFAULT_MAX_ROUNDS,
            word_size: CommStats::DEFAULT_WORD_SIZE,
        }
    }

    /// Config using the diameter bound stored in `graph`.
    pub fn for_graph(delta: f64, graph: &Digraph) -> Self {
        Self::new(delta, graph.diameter_bound())
    }

    pub fn validate(&self, graph: &Digraph) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidQuantization(self.delta));
        }
        if self.diameter_bound < graph.diameter() {
            return Err(Error::DiameterBoundTooSmall {
                bound: self.diameter_bound,
                diameter: graph.diameter(),
            });
        }
        Ok(())
    }
}

/// One agent's protocol state for one vector component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FtqcNodeState {
    pub y: i64,
    pub z: i64,
    pub vote_upper: i64,
    pub vote_lower: i64,
    pub terminated: bool,
    pub result: i64,
}

impl FtqcNodeState {
    pub fn init(x: f64, delta: f64) -> Result<Self> {
        let level = quantize_level(x, delta)?;
        Ok(Self {
            y: 2 * level,
            z: 2,
            vote_upper: 0,
            vote_lower: 0,
            terminated: false,
            result: 0,
        })
    }

    pub fn absorb(&mut self, mass: i64) {
        self.y += mass;
        self.z += 1;
    }

    /// Splits off tokens until one remains, passing each mass to `send`.
    pub fn emit(&mut self, mut send: impl FnMut(i64)) {
        while self.z > 1 {
            let t = floor_div(self.y, self.z);
            self.y -= t;
            self.z -= 1;
            send(t);
        }
    }

    /// Local `(ceil(y/z), floor(y/z))`, or the frozen result once terminated.
    pub fn local_bounds(&self) -> VoteBounds {
        if self.terminated {
            VoteBounds {
                upper: self.result,
                lower: self.result,
            }
        } else {
            VoteBounds {
                upper: ceil_div(self.y, self.z),
                lower: floor_div(self.y, self.z),
            }
        }
    }
}

/// Hooks into a protocol run, used for invariant checking.
pub trait FtqcObserver {
    /// After each token round; `in_flight` are the inboxes not yet absorbed.
    /// `states` is laid out node-major with `dim` components per node.
    fn after_token_round(&mut self, _dim: usize, _states: &[FtqcNodeState], _in_flight: &[Vec<Message>]) {}

    /// After the flooding phase of a vote, before the decision. `local` holds
    /// the bounds each agent started the vote with, `flooded` the bounds after
    /// `D` flooding rounds (both node-major).
    fn after_vote(&mut self, _dim: usize, _local: &[VoteBounds], _flooded: &[VoteBounds], _states: &[FtqcNodeState]) {}
}

/// Observer that does nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoObserver;

impl FtqcObserver for NoObserver {}

#[derive(Debug, Clone, PartialEq)]
pub struct FtqcOutcome {
    /// `delta * level` per component.
    pub consensus: Vec<f64>,
    /// Agreed integer level per component.
    pub levels: Vec<i64>,
    /// Level each agent decided, node-major with `dim` entries per agent.
    pub agent_levels: Vec<i64>,
    pub token_rounds: u64,
    pub vote_rounds: u64,
    pub votes: u64,
    pub stats: CommStats,
}

impl FtqcOutcome {
    /// Token rounds plus vote flooding rounds.
    pub fn rounds_used(&self) -> u64 {
        self.token_rounds + self.vote_rounds
    }
}

/// Scalar protocol run. Returns the agreed value and the rounds used.
pub fn run_scalar(values: &[f64], graph: &Digraph, cfg: &FtqcConfig, seed: u64) -> Result<(f64, u64)> {
    let view = ArrayView2::from_shape((values.len(), 1), values).map_err(|_| Error::DimensionMismatch {
        expected: graph.node_count(),
        actual: values.len(),
    })?;
    let out = run_vector(view, graph, cfg, seed)?;
    Ok((out.consensus[0], out.rounds_used()))
}

/// Runs one protocol instance per column of `values` (one row per agent).
pub fn run_vector(values: ArrayView2<'_, f64>, graph: &Digraph, cfg: &FtqcConfig, seed: u64) -> Result<FtqcOutcome> {
    run_vector_observed(values, graph, cfg, seed, &mut NoObserver)
}

pub fn run_vector_observed<O: FtqcObserver + ?Sized>(
    values: ArrayView2<'_, f64>,
    graph: &Digraph,
    cfg: &FtqcConfig,
    seed: u64,
    observer: &mut O,
) -> Result<FtqcOutcome> {
    cfg.validate(graph)?;
    let nodes = graph.node_count();
    if values.nrows() != nodes {
        return Err(Error::DimensionMismatch {
            expected: nodes,
            actual: values.nrows(),
        });
    }
    let dim = values.ncols();
    let mut states = Vec::with_capacity(nodes * dim);
    for row in values.rows() {
        for &x in row {
            states.push(FtqcNodeState::init(x, cfg.delta)?);
        }
    }

    let mut net = Network::new(graph, cfg.word_size);
    let mut outboxes: Vec<Vec<Message>> = vec![Vec::new(); nodes];
    let mut inboxes: Vec<Vec<Message>> = vec![Vec::new(); nodes];
    let mut active = dim;
    let mut token_rounds = 0u64;
    let mut vote_rounds = 0u64;
    let mut votes = 0u64;
    let period = cfg.diameter_bound.max(1) as u64;

    for round in 1u64.. {
        for (node, inbox) in inboxes.iter_mut().enumerate() {
            for m in inbox.drain(..) {
                if let Payload::Token { component, mass } = m.payload {
                    states[node * dim + component as usize].absorb(mass);
                }
            }
        }

        if (round - 1) % period == 0 {
            votes += 1;
            vote_rounds += vote(&mut states, dim, &mut net, cfg.diameter_bound.max(1), observer)?;
            active = (0..dim).filter(|&c| !states[c].terminated).count();
            if active == 0 {
                break;
            }
        }

        if net.round() >= cfg.max_rounds {
            return Err(stall(&states, dim, net.round(), active));
        }

        for node in 0..nodes {
            let neighbors = graph.out_neighbors(node);
            let mut rng = seeded_rng(seed, node, round);
            let outbox = &mut outboxes[node];
            for (c, state) in states[node * dim..(node + 1) * dim].iter_mut().enumerate() {
                if state.terminated {
                    continue;
                }
                state.emit(|mass| {
                    let dst = neighbors[rng.random_range(0..neighbors.len())];
                    outbox.push(Message {
                        src: node,
                        dst,
                        round_sent: round,
                        payload: Payload::Token {
                            component: c as u32,
                            mass,
                        },
                    });
                });
            }
        }
        net.deliver(&mut outboxes, &mut inboxes)?;
        token_rounds += 1;
        observer.after_token_round(dim, &states, &inboxes);
    }

    let levels: Vec<i64> = (0..dim).map(|c| states[c].result).collect();
    if log::log_enabled!(log::Level::Debug) {
        let hits = levels
            .iter()
            .zip(values.columns())
            .filter(|(&l, col)| col.mean().is_some_and(|m| (m / cfg.delta).floor() as i64 == l))
            .count();
        log::debug!("{hits}/{dim} components agreed on the floored mean level");
    }
    Ok(FtqcOutcome {
        consensus: levels.iter().map(|&l| l as f64 * cfg.delta).collect(),
        levels,
        agent_levels: states.iter().map(|s| s.result).collect(),
        token_rounds,
        vote_rounds,
        votes,
        stats: net.stats(),
    })
}

/// Flooding vote followed by the termination check. Returns the number of
/// communication rounds spent.
fn vote<O: FtqcObserver + ?Sized>(
    states: &mut [FtqcNodeState],
    dim: usize,
    net: &mut Network<'_>,
    rounds: usize,
    observer: &mut O,
) -> Result<u64> {
    let local: Vec<VoteBounds> = states.iter().map(FtqcNodeState::local_bounds).collect();
    let mut bounds = local.clone();
    flood(&mut bounds, dim, net, rounds)?;
    observer.after_vote(dim, &local, &bounds, states);

    for (state, b) in states.iter_mut().zip(&bounds) {
        if state.terminated {
            continue;
        }
        state.vote_upper = b.upper;
        state.vote_lower = b.lower;
        if b.upper - b.lower <= 1 {
            state.terminated = true;
            state.result = b.lower;
        }
    }
    Ok(rounds as u64)
}

/// `rounds` rounds of max/min flooding: every agent broadcasts its bounds and
/// keeps the max upper and min lower over itself and its in-neighbors.
pub fn flood(bounds: &mut [VoteBounds], dim: usize, net: &mut Network<'_>, rounds: usize) -> Result<()> {
    let graph = net.graph();
    let nodes = graph.node_count();
    let mut outboxes: Vec<Vec<Message>> = vec![Vec::new(); nodes];
    let mut inboxes: Vec<Vec<Message>> = vec![Vec::new(); nodes];

    for _ in 0..rounds {
        let sent_round = net.round();
        for node in 0..nodes {
            let payload: Arc<[VoteBounds]> = bounds[node * dim..(node + 1) * dim].into();
            for &dst in graph.out_neighbors(node) {
                outboxes[node].push(Message {
                    src: node,
                    dst,
                    round_sent: sent_round,
                    payload: Payload::Vote(Arc::clone(&payload)),
                });
            }
        }
        net.deliver(&mut outboxes, &mut inboxes)?;
        for (node, inbox) in inboxes.iter().enumerate() {
            let own = &mut bounds[node * dim..(node + 1) * dim];
            for m in inbox {
                if let Payload::Vote(pairs) = &m.payload {
                    for (mine, theirs) in own.iter_mut().zip(pairs.iter()) {
                        mine.upper = mine.upper.max(theirs.upper);
                        mine.lower = mine.lower.min(theirs.lower);
                    }
                }
            }
        }
    }
    Ok(())
}

fn stall(states: &[FtqcNodeState], dim: usize, rounds: u64, active: usize) -> Error {
    let spread = (0..dim)
        .filter(|&c| !states[c].terminated)
        .map(|c| {
            let column = states.iter().skip(c).step_by(dim).map(FtqcNodeState::local_bounds);
            let (hi, lo) = column.fold((i64::MIN, i64::MAX), |(hi, lo), b| (hi.max(b.upper), lo.min(b.lower)));
            hi - lo
        })
        .max()
        .unwrap_or(0);
    Error::ProtocolStall {
        rounds,
        active,
        components: dim,
        spread,
    }
}
