//! Shared fixtures for the benchmarks: the default ten-agent ring with
//! chords and a matching logistic problem.

use ftqc_core::{Digraph, Problem, ProblemConfig, Result};
use ndarray::Array2;

pub const TOPOLOGY_SEED: u64 = 7;

pub fn network(agents: usize) -> Result<Digraph> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(TOPOLOGY_SEED);
    Digraph::ring_with_chords(agents, agents / 2, &mut rng)
}

pub fn problem(agents: usize, dim: usize) -> Result<Problem> {
    Problem::generate(ProblemConfig {
        agents,
        dim,
        ..ProblemConfig::default()
    })
}

/// Deterministic spread of values in `[-1, 1)`, one row per agent.
pub fn values(agents: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((agents, dim), |(i, j)| {
        let h = (i * 7919 + j * 104_729) % 1000;
        h as f64 / 500.0 - 1.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert_eq!(network(10).unwrap().node_count(), 10);
        assert_eq!(problem(10, 16).unwrap().dim(), 16);
        let v = values(10, 16);
        assert!(v.iter().all(|x| (-1.0..1.0).contains(x)));
    }
}
