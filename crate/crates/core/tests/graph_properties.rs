use std::collections::VecDeque;

use ftqc_core::digraph::is_strongly_connected;
use ftqc_core::Digraph;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Boolean transitive closure by Floyd-Warshall.
fn closure(nodes: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut reach = vec![vec![false; nodes]; nodes];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(s, d) in edges {
        reach[s][d] = true;
    }
    for k in 0..nodes {
        for i in 0..nodes {
            if reach[i][k] {
                for j in 0..nodes {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

fn bfs_eccentricity(graph: &Digraph, src: usize) -> usize {
    let mut dist = vec![usize::MAX; graph.node_count()];
    dist[src] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &v in graph.out_neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist.into_iter().max().unwrap()
}

fn arbitrary_edges() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..9).prop_flat_map(|n| {
        let edge = (0..n, 0..n).prop_filter("no self loops", |(a, b)| a != b);
        (Just(n), prop::collection::vec(edge, 0..3 * n))
    })
}

proptest! {
    #[test]
    fn connectivity_matches_closure((n, edges) in arbitrary_edges()) {
        let reach = closure(n, &edges);
        let expected = reach.iter().all(|row| row.iter().all(|&r| r));
        prop_assert_eq!(is_strongly_connected(n, &edges).unwrap(), expected);
        prop_assert_eq!(Digraph::new(n, &edges).is_ok(), expected);
    }

    #[test]
    fn diameter_matches_bfs(n in 2usize..12, extra in 0usize..15, seed in any::<u64>()) {
        let g = Digraph::random_strongly_connected(n, extra, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let diameter = (0..n).map(|s| bfs_eccentricity(&g, s)).max().unwrap();
        prop_assert_eq!(g.diameter(), diameter.max(1));
        prop_assert!(g.is_strongly_connected());
    }

    #[test]
    fn metropolis_weights_mix(n in 2usize..10, chords in 0usize..6, seed in any::<u64>()) {
        let g = Digraph::ring_with_chords(n, chords, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assume!(g.is_symmetric());
        let w = g.metropolis_weights().unwrap();
        prop_assert!(w.stochasticity_error() < 1e-12);
        prop_assert!(w.weights().iter().all(|&v| v >= 0.0));
        prop_assert!(w.consensus_radius(500) < 1.0);
    }
}
