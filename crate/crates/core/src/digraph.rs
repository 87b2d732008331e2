//! Directed communication topologies.
//!
//! An edge `(i, j)` means agent `i` transmits to agent `j`: `j` is an
//! out-neighbor of `i` and `i` is an in-neighbor of `j`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Strongly connected directed graph with precomputed neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    out_neighbors: Vec<Vec<usize>>,
    in_neighbors: Vec<Vec<usize>>,
    diameter: usize,
    diameter_bound: usize,
}

impl Digraph {
    /// Builds a digraph from directed edges and computes its diameter by
    /// all-pairs BFS. Duplicate edges are merged.
    pub fn new(nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let (edges, out_neighbors, in_neighbors) = adjacency(nodes, edges)?;
        let diameter = match eccentricities(&out_neighbors) {
            Ok(ecc) => ecc.into_iter().max().unwrap_or(0).max(1),
            Err((from, unreachable)) => {
                return Err(Error::NotStronglyConnected { from, unreachable })
            }
        };
        Ok(Self {
            nodes,
            edges,
            out_neighbors,
            in_neighbors,
            diameter,
            diameter_bound: diameter,
        })
    }

    /// Replaces the diameter used by the protocol with a known upper bound.
    pub fn with_diameter_bound(mut self, bound: usize) -> Result<Self> {
        if bound < self.diameter {
            return Err(Error::DiameterBoundTooSmall {
                bound,
                diameter: self.diameter,
            });
        }
        self.diameter_bound = bound;
        Ok(self)
    }

    /// Directed ring `0 -> 1 -> ... -> n-1 -> 0`.
    pub fn ring(nodes: usize) -> Result<Self> {
        let edges: Vec<_> = if nodes < 2 {
            Vec::new()
        } else {
            (0..nodes).map(|i| (i, (i + 1) % nodes)).collect()
        };
        Self::new(nodes, &edges)
    }

    /// Ring with both directions on every link.
    pub fn symmetric_ring(nodes: usize) -> Result<Self> {
        let mut edges = BTreeSet::new();
        if nodes >= 2 {
            for i in 0..nodes {
                let j = (i + 1) % nodes;
                edges.insert((i, j));
                edges.insert((j, i));
            }
        }
        Self::new(nodes, &edges.into_iter().collect::<Vec<_>>())
    }

    pub fn complete(nodes: usize) -> Result<Self> {
        let edges: Vec<_> = (0..nodes)
            .flat_map(|i| (0..nodes).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        Self::new(nodes, &edges)
    }

    /// Symmetric ring plus `chords` random symmetric links between
    /// non-adjacent agents. Fewer chords are added if the graph saturates.
    pub fn ring_with_chords<R: Rng + ?Sized>(nodes: usize, chords: usize, rng: &mut R) -> Result<Self> {
        let mut edges: BTreeSet<(usize, usize)> = Self::symmetric_ring(nodes)?.edges.into_iter().collect();
        let mut candidates: Vec<(usize, usize)> = (0..nodes)
            .flat_map(|i| (i + 1..nodes).map(move |j| (i, j)))
            .filter(|e| !edges.contains(e))
            .collect();
        candidates.shuffle(rng);
        for &(i, j) in candidates.iter().take(chords) {
            edges.insert((i, j));
            edges.insert((j, i));
        }
        Self::new(nodes, &edges.into_iter().collect::<Vec<_>>())
    }

    /// Directed Hamiltonian cycle over a random permutation plus `extra`
    /// random directed edges. Always strongly connected, generally asymmetric.
    pub fn random_strongly_connected<R: Rng + ?Sized>(
        nodes: usize,
        extra: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut order: Vec<usize> = (0..nodes).collect();
        order.shuffle(rng);
        let mut edges = BTreeSet::new();
        if nodes >= 2 {
            for w in 0..nodes {
                edges.insert((order[w], order[(w + 1) % nodes]));
            }
        }
        let mut candidates: Vec<(usize, usize)> = (0..nodes)
            .flat_map(|i| (0..nodes).filter(move |&j| j != i).map(move |j| (i, j)))
            .filter(|e| !edges.contains(e))
            .collect();
        candidates.shuffle(rng);
        edges.extend(candidates.into_iter().take(extra));
        Self::new(nodes, &edges.into_iter().collect::<Vec<_>>())
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    /// Sorted, deduplicated edge list.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Agents that `i` transmits to.
    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_neighbors[i]
    }

    /// Agents that `i` receives from.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        src < self.nodes && self.out_neighbors[src].binary_search(&dst).is_ok()
    }

    /// Longest shortest directed path (at least 1).
    pub fn diameter(&self) -> usize {
        self.diameter
    }

    /// Diameter known to the agents: the exact diameter unless overridden.
    pub fn diameter_bound(&self) -> usize {
        self.diameter_bound
    }

    pub fn is_strongly_connected(&self) -> bool {
        eccentricities(&self.out_neighbors).is_ok()
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|&(i, j)| self.has_edge(j, i))
    }

    /// Metropolis-Hastings weights `1 / (1 + max(deg_i, deg_j))` on every
    /// link, with the remainder on the diagonal. Requires a symmetric graph.
    pub fn metropolis_weights(&self) -> Result<MixMatrix> {
        if let Some(&(src, dst)) = self.edges.iter().find(|&&(i, j)| !self.has_edge(j, i)) {
            return Err(Error::AsymmetricGraph { src, dst });
        }
        let n = self.nodes;
        let degree: Vec<usize> = self.out_neighbors.iter().map(Vec::len).collect();
        let mut w = Array2::<f64>::zeros((n, n));
        for &(i, j) in &self.edges {
            w[[i, j]] = 1.0 / (1.0 + degree[i].max(degree[j]) as f64);
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[[i, j]]).sum();
            w[[i, i]] = 1.0 - off;
        }
        Ok(MixMatrix { weights: w })
    }

    /// Parses the plain-text edge-list format: the first line holds the node
    /// count, every further line one directed edge `i j`. Blank lines and
    /// `#` comments are ignored.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut nodes = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse = |tok: &str| {
                tok.parse::<usize>().map_err(|e| Error::Parse {
                    line: line_no,
                    message: format!("invalid integer {tok:?}: {e}"),
                })
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match (nodes, fields.as_slice()) {
                (None, [n]) => nodes = Some(parse(n)?),
                (None, _) => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "expected the node count on the first line".into(),
                    })
                }
                (Some(_), [i, j]) => edges.push((parse(i)?, parse(j)?)),
                (Some(_), _) => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected `i j`, got {line:?}"),
                    })
                }
            }
        }
        let nodes = nodes.ok_or(Error::Parse {
            line: 1,
            message: "missing node count".into(),
        })?;
        Self::new(nodes, &edges)
    }

    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.nodes);
        for (i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }
}

/// Reachability check on a raw edge list; does not require a valid
/// [`Digraph`]. Fails only on invalid indices or self-loops.
pub fn is_strongly_connected(nodes: usize, edges: &[(usize, usize)]) -> Result<bool> {
    let (_, out, _) = adjacency(nodes, edges)?;
    Ok(eccentricities(&out).is_ok())
}

type Adjacency = (Vec<(usize, usize)>, Vec<Vec<usize>>, Vec<Vec<usize>>);

fn adjacency(nodes: usize, edges: &[(usize, usize)]) -> Result<Adjacency> {
    if nodes == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut set = BTreeSet::new();
    for &(src, dst) in edges {
        if src >= nodes || dst >= nodes {
            return Err(Error::InvalidNode { src, dst, nodes });
        }
        if src == dst {
            return Err(Error::SelfLoop(src));
        }
        set.insert((src, dst));
    }
    let mut out = vec![Vec::new(); nodes];
    let mut inn = vec![Vec::new(); nodes];
    for &(i, j) in &set {
        out[i].push(j);
        inn[j].push(i);
    }
    for list in inn.iter_mut() {
        list.sort_unstable();
    }
    Ok((set.into_iter().collect(), out, inn))
}

/// BFS eccentricity of every node, or the first `(from, unreachable)` pair.
fn eccentricities(out: &[Vec<usize>]) -> std::result::Result<Vec<usize>, (usize, usize)> {
    let n = out.len();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::with_capacity(n);
    let mut ecc = Vec::with_capacity(n);
    for s in 0..n {
        dist.fill(usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &v in &out[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if let Some(unreachable) = dist.iter().position(|&d| d == usize::MAX) {
            return Err((s, unreachable));
        }
        ecc.push(dist.iter().copied().max().unwrap_or(0));
    }
    Ok(ecc)
}

/// Doubly stochastic mixing matrix for the averaging baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct MixMatrix {
    weights: Array2<f64>,
}

impl MixMatrix {
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[[i, j]]
    }

    pub fn size(&self) -> usize {
        self.weights.nrows()
    }

    /// Largest absolute deviation of any row or column sum from 1.
    pub fn stochasticity_error(&self) -> f64 {
        let rows = self.weights.rows().into_iter().map(|r| (r.sum() - 1.0).abs());
        let cols = self.weights.columns().into_iter().map(|c| (c.sum() - 1.0).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    /// Spectral radius of `W - 11^T / N`, estimated by power iteration on its
    /// square (the square is positive semidefinite for symmetric `W`).
    pub fn consensus_radius(&self, iterations: usize) -> f64 {
        let n = self.size();
        if n == 1 {
            return 0.0;
        }
        let centered = &self.weights - 1.0 / n as f64;
        let sq = centered.dot(&centered);
        let mut v = ndarray::Array1::from_iter((0..n).map(|i| 1.0 + (i as f64 * 0.7548776662).sin()));
        let mut estimate = 0.0;
        for _ in 0..iterations {
            let next = sq.dot(&v);
            let norm = next.dot(&next).sqrt();
            let prev = v.dot(&v).sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            estimate = norm / prev;
            v = next / norm;
        }
        estimate.sqrt()
    }
}
