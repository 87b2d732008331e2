use ftqc_core::ftqc::{self, FtqcObserver};
use ftqc_core::simnet::{seeded_rng, VoteBounds};
use ftqc_core::{Digraph, FtqcConfig, FtqcNodeState, Message, Payload};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight-line scalar protocol with centrally computed votes.
fn reference_scalar(values: &[f64], graph: &Digraph, delta: f64, seed: u64) -> (i64, u64) {
    let n = values.len();
    let d = graph.diameter_bound().max(1) as u64;
    let mut y: Vec<i64> = values.iter().map(|v| 2 * (v / delta).floor() as i64).collect();
    let mut z = vec![2i64; n];
    let mut inbox: Vec<Vec<i64>> = vec![Vec::new(); n];
    let mut rounds = 0u64;
    for round in 1u64.. {
        for i in 0..n {
            for t in inbox[i].drain(..) {
                y[i] += t;
                z[i] += 1;
            }
        }
        if (round - 1) % d == 0 {
            rounds += d;
            let hi = (0..n).map(|i| (y[i] as f64 / z[i] as f64).ceil() as i64).max().unwrap();
            let lo = (0..n).map(|i| (y[i] as f64 / z[i] as f64).floor() as i64).min().unwrap();
            if hi - lo <= 1 {
                return (lo, rounds);
            }
        }
        let mut next: Vec<Vec<i64>> = vec![Vec::new(); n];
        for i in 0..n {
            let mut rng = seeded_rng(seed, i, round);
            let nb = graph.out_neighbors(i);
            while z[i] > 1 {
                let t = (y[i] as f64 / z[i] as f64).floor() as i64;
                y[i] -= t;
                z[i] -= 1;
                next[nb[rng.random_range(0..nb.len())]].push(t);
            }
        }
        // deliveries are ordered by source, matching the simulator
        inbox = next;
        rounds += 1;
    }
    unreachable!()
}

#[test]
fn ring_of_three_matches_reference() {
    let g = Digraph::ring(3).unwrap();
    let values = [0.25, 0.65, 0.85];
    let cfg = FtqcConfig::for_graph(0.1, &g);
    let mean = values.iter().sum::<f64>() / 3.0;
    let mut exact_floor_hits = 0;
    for seed in 0..1000 {
        let (reference_level, reference_rounds) = reference_scalar(&values, &g, 0.1, seed);
        let (value, rounds) = ftqc::run_scalar(&values, &g, &cfg, seed).unwrap();
        assert_eq!(reference_level, 5, "seed {seed}");
        assert!((value - 0.5).abs() < 1e-12, "seed {seed}: {value}");
        assert!((value - mean).abs() <= 0.2);
        assert_eq!(rounds, reference_rounds, "seed {seed}");
        if reference_level == (mean / 0.1).floor() as i64 {
            exact_floor_hits += 1;
        }
    }
    eprintln!("exact floor(mean) hits: {exact_floor_hits}/1000");
}

#[test]
fn random_graphs_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..50u64 {
        let n = rng.random_range(3..=8);
        let g = Digraph::random_strongly_connected(n, rng.random_range(0..n), &mut rng).unwrap();
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let cfg = FtqcConfig::for_graph(0.05, &g);
        let (level, rounds) = reference_scalar(&values, &g, 0.05, trial);
        let out = ftqc::run_vector(Array2::from_shape_vec((n, 1), values).unwrap().view(), &g, &cfg, trial).unwrap();
        assert_eq!(out.levels, vec![level]);
        assert_eq!(out.rounds_used(), rounds);
    }
}

/// Checks conservation after every token round and vote soundness at every vote.
struct Auditor {
    mass: Vec<i64>,
    count: i64,
    expect_terminated: Option<Vec<bool>>,
    last_vote_min: Vec<i64>,
    token_rounds: u64,
    votes: u64,
}

impl Auditor {
    fn new(values: &Array2<f64>, delta: f64) -> Self {
        let mass = values
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|v| 2 * (v / delta).floor() as i64).sum())
            .collect();
        Self {
            mass,
            count: 2 * values.nrows() as i64,
            expect_terminated: None,
            last_vote_min: vec![0; values.ncols()],
            token_rounds: 0,
            votes: 0,
        }
    }
}

impl FtqcObserver for Auditor {
    fn after_token_round(&mut self, dim: usize, states: &[FtqcNodeState], in_flight: &[Vec<Message>]) {
        self.token_rounds += 1;
        for c in 0..dim {
            let mut y: i64 = states.iter().skip(c).step_by(dim).map(|s| s.y).sum();
            let mut z: i64 = states.iter().skip(c).step_by(dim).map(|s| s.z).sum();
            for m in in_flight.iter().flatten() {
                if let Payload::Token { component, mass } = m.payload {
                    if component as usize == c {
                        y += mass;
                        z += 1;
                    }
                }
            }
            assert_eq!(y, self.mass[c], "mass of component {c}");
            assert_eq!(z, self.count, "token count of component {c}");
        }
        if let Some(expect) = self.expect_terminated.take() {
            for (c, &e) in expect.iter().enumerate() {
                assert!(states.iter().skip(c).step_by(dim).all(|s| s.terminated == e));
            }
        }
    }

    fn after_vote(&mut self, dim: usize, local: &[VoteBounds], flooded: &[VoteBounds], states: &[FtqcNodeState]) {
        self.votes += 1;
        let mut expect = Vec::with_capacity(dim);
        for c in 0..dim {
            let hi = local.iter().skip(c).step_by(dim).map(|b| b.upper).max().unwrap();
            let lo = local.iter().skip(c).step_by(dim).map(|b| b.lower).min().unwrap();
            assert!(flooded.iter().skip(c).step_by(dim).all(|b| b.upper == hi && b.lower == lo));
            let already = states[c].terminated;
            expect.push(already || hi - lo <= 1);
            if !already {
                self.last_vote_min[c] = lo;
            }
        }
        self.expect_terminated = Some(expect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn protocol_invariants(
        nodes in 3usize..=10,
        extra in 0usize..12,
        dim in prop::sample::select(vec![1usize, 4, 16]),
        delta in prop::sample::select(vec![1e-3, 1e-1]),
        scale in 0.1f64..5.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Digraph::random_strongly_connected(nodes, extra, &mut rng).unwrap();
        let values = Array2::from_shape_fn((nodes, dim), |_| rng.random_range(-scale..scale));
        let cfg = FtqcConfig::for_graph(delta, &g);
        let mut audit = Auditor::new(&values, delta);
        let out = ftqc::run_vector_observed(values.view(), &g, &cfg, seed, &mut audit).unwrap();

        prop_assert!(out.rounds_used() < 100_000);
        prop_assert_eq!(out.token_rounds, audit.token_rounds);
        prop_assert_eq!(out.votes, audit.votes);
        prop_assert_eq!(&out.levels, &audit.last_vote_min);
        for (i, level) in out.agent_levels.iter().enumerate() {
            prop_assert_eq!(*level, out.levels[i % dim], "agent {} disagrees", i / dim);
        }
        let mut stacked = 0.0;
        for c in 0..dim {
            let mean = values.column(c).mean().unwrap();
            let err = out.consensus[c] - mean;
            prop_assert!(err.abs() <= 2.0 * delta + 1e-12, "component {}: {}", c, err);
            stacked += nodes as f64 * err * err;
        }
        prop_assert!(stacked.sqrt() <= 2.0 * delta * ((dim * nodes) as f64).sqrt() + 1e-12);
    }
}

#[test]
fn constant_component_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = Digraph::random_strongly_connected(6, 4, &mut rng).unwrap();
    for seed in 0..50 {
        let values = Array2::from_shape_fn((6, 2), |(_, c)| if c == 0 { 0.5 } else { rng.random_range(-1.0..1.0) });
        let out = ftqc::run_vector(values.view(), &g, &FtqcConfig::for_graph(0.1, &g), seed).unwrap();
        assert_eq!(out.levels[0], 5);
        let mean = values.column(1).mean().unwrap();
        assert!((out.consensus[1] - mean).abs() <= 0.2 + 1e-12);
    }
}

#[test]
fn vector_of_one_matches_scalar() {
    let g = Digraph::ring(5).unwrap();
    let values = [0.11, -0.42, 0.93, 0.05, 0.37];
    let cfg = FtqcConfig::for_graph(0.01, &g);
    for seed in 0..20 {
        let (v, r) = ftqc::run_scalar(&values, &g, &cfg, seed).unwrap();
        let out = ftqc::run_vector(Array2::from_shape_vec((5, 1), values.to_vec()).unwrap().view(), &g, &cfg, seed).unwrap();
        assert_eq!(out.consensus, vec![v]);
        assert_eq!(out.rounds_used(), r);
    }
}
