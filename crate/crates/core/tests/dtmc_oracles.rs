use std::collections::HashMap;

use abe_election::batch::run_batch;
use abe_election::dtmc::{
    build_dtmc, build_dtmc_with, exhaustive_invariant_check, expected_rounds, termination_probability,
    DtmcModel, DtmcOptions,
};
use abe_election::protocol::NodeState;
use abe_election::sim::{Activation, RunOptions, SimConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Key = (Vec<(NodeState, u32)>, Vec<u32>);

/// Stand-alone sampler of the lockstep semantics: every message moves one
/// link per step and is processed, then every idle node gambles.
#[derive(Clone)]
struct Lockstep {
    n: usize,
    a0: f64,
    nodes: Vec<(NodeState, u32)>,
    /// Hop of the message on link i (from node i to node i+1), 0 if empty.
    links: Vec<u32>,
}

impl Lockstep {
    fn new(n: usize, a0: f64) -> Self {
        Lockstep {
            n,
            a0,
            nodes: vec![(NodeState::Idle, 1); n],
            links: vec![0; n],
        }
    }

    fn elected(&self) -> bool {
        self.nodes.iter().any(|x| x.0 == NodeState::Leader)
    }

    fn step(&mut self, rng: &mut impl Rng) {
        if self.elected() {
            return;
        }
        let n = self.n;
        let mut links = vec![0; n];
        for i in 0..n {
            let hop = self.links[i];
            if hop == 0 {
                continue;
            }
            let j = (i + 1) % n;
            let (state, dead) = self.nodes[j];
            let dead = dead.max(hop);
            self.nodes[j] = match state {
                NodeState::Idle | NodeState::Passive => {
                    links[j] = dead + 1;
                    (NodeState::Passive, dead)
                }
                NodeState::Active if hop as usize == n => (NodeState::Leader, dead),
                NodeState::Active => (NodeState::Idle, dead),
                NodeState::Leader => panic!("leader got a message"),
            };
        }
        for i in 0..n {
            let (state, dead) = self.nodes[i];
            if state == NodeState::Idle && rng.random::<f64>() < 1.0 - (1.0 - self.a0).powi(dead as i32) {
                self.nodes[i] = (NodeState::Active, dead);
                links[i] = 1;
            }
        }
        self.links = links;
    }

    fn key(&self) -> Key {
        (self.nodes.clone(), self.links.clone())
    }
}

fn model_keys(m: &DtmcModel) -> HashMap<Key, usize> {
    m.states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let nodes = s.nodes().iter().map(|x| (x.state, x.dead)).collect();
            let links = s.links().iter().map(|l| l.map_or(0, |m| m.hop)).collect();
            ((nodes, links), i)
        })
        .collect()
}

#[test]
fn two_node_initial_row_is_four_fair_outcomes() {
    let m = build_dtmc(2, 0.5).unwrap();
    let row = &m.transitions[0];
    assert_eq!(row.len(), 4);
    assert!(row.iter().all(|&(_, p)| (p - 0.25).abs() < 1e-15));
}

#[test]
fn built_models_are_stochastic() {
    for n in 2..=5 {
        for a0 in [0.05, 0.5, 0.95] {
            let m = build_dtmc_with(n, a0, &DtmcOptions::lean()).unwrap();
            m.validate().unwrap();
            assert!(m.absorbing.iter().any(|&a| a));
        }
    }
}

#[test]
fn transient_distribution_matches_sampled_trajectories() {
    let (n, a0, steps, samples) = (3, 0.3, 3, 1_000_000u64);
    let m = build_dtmc_with(n, a0, &DtmcOptions::lean()).unwrap();
    let keys = model_keys(&m);
    let exact = m.transient_distribution(steps);

    let mut counts = vec![0u64; m.num_states()];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..samples {
        let mut s = Lockstep::new(n, a0);
        for _ in 0..steps {
            s.step(&mut rng);
        }
        let idx = keys.get(&s.key()).expect("sampled state exists in the model");
        counts[*idx] += 1;
    }
    let big = samples as f64;
    for (i, &p) in exact.iter().enumerate() {
        let sigma = (big * p * (1.0 - p)).sqrt();
        let diff = (counts[i] as f64 - big * p).abs();
        assert!(diff <= 3.0 * sigma.max(1.0), "state {}: {} vs {}", m.states[i], counts[i], big * p);
    }
}

#[test]
fn two_node_expected_rounds_match_sampling() {
    let m = build_dtmc(2, 0.5).unwrap();
    let exact = expected_rounds(&m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples = 1_000_000;
    let mut total = 0u64;
    for _ in 0..samples {
        let mut s = Lockstep::new(2, 0.5);
        while !s.elected() {
            s.step(&mut rng);
            total += 1;
        }
    }
    let mean = total as f64 / samples as f64;
    assert!((mean - exact).abs() / exact < 0.01, "{mean} vs {exact}");
}

/// Dense LU solves of the absorption and first-passage systems.
fn dense_solutions(m: &DtmcModel) -> (f64, f64) {
    let transient: Vec<usize> = (0..m.num_states()).filter(|&i| !m.absorbing[i]).collect();
    let pos: HashMap<usize, usize> = transient.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let k = transient.len();
    let mut a = DMatrix::<f64>::identity(k, k);
    let mut absorb = DVector::<f64>::zeros(k);
    for (r, &i) in transient.iter().enumerate() {
        for &(t, p) in &m.transitions[i] {
            match pos.get(&(t as usize)) {
                Some(&c) => a[(r, c)] -= p,
                None => absorb[r] += p,
            }
        }
    }
    let lu = a.lu();
    let h = lu.solve(&absorb).unwrap();
    let t = lu.solve(&DVector::from_element(k, 1.0)).unwrap();
    (h[pos[&0]], t[pos[&0]])
}

#[test]
fn iterative_solvers_match_dense_lu() {
    for n in [2, 3, 4] {
        for a0 in [0.1, 0.3, 0.7] {
            let m = build_dtmc_with(n, a0, &DtmcOptions::lean()).unwrap();
            let (h, t) = dense_solutions(&m);
            let p = termination_probability(&m).unwrap();
            let e = expected_rounds(&m).unwrap();
            assert!((p - h).abs() < 1e-10, "n={n} a0={a0}: {p} vs {h}");
            assert!((e - t).abs() / t < 1e-8, "n={n} a0={a0}: {e} vs {t}");
        }
    }
}

#[test]
fn termination_is_certain_for_small_rings() {
    for n in [3, 4] {
        for k in 1..=9 {
            let m = build_dtmc_with(n, k as f64 / 10.0, &DtmcOptions::lean()).unwrap();
            assert!(termination_probability(&m).unwrap() >= 1.0 - 1e-9);
        }
    }
}

#[test]
fn three_node_expected_time_is_unimodal() {
    let values: Vec<f64> = (1..=19)
        .map(|k| {
            let m = build_dtmc_with(3, k as f64 * 0.05, &DtmcOptions::lean()).unwrap();
            expected_rounds(&m).unwrap()
        })
        .collect();
    let argmin = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert!(argmin > 0 && argmin < values.len() - 1);
    assert!(values[..=argmin].windows(2).all(|w| w[0] > w[1]));
    assert!(values[argmin..].windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn broken_absorbing_row_is_rejected() {
    let mut m = build_dtmc(3, 0.3).unwrap();
    let leader = m.absorbing.iter().position(|&a| a).unwrap();
    m.transitions[leader] = vec![(0, 1.0)];
    assert!(m.validate().is_err());
    assert!(termination_probability(&m).is_err());
    assert!(expected_rounds(&m).is_err());
}

#[test]
fn every_reachable_state_satisfies_the_invariants() {
    for (n, a0) in [(3, 0.3), (3, 0.1), (4, 0.5), (4, 0.1), (5, 0.2)] {
        let m = build_dtmc(n, a0).unwrap();
        let report = exhaustive_invariant_check(&m).unwrap();
        assert_eq!(report.states_checked, m.num_states());
        assert!(report.is_clean(), "{:?}", report.violations.first());
    }
    let lean = build_dtmc_with(3, 0.3, &DtmcOptions::lean()).unwrap();
    assert!(exhaustive_invariant_check(&lean).is_err());
}

#[test]
fn state_space_guard() {
    assert!(build_dtmc(6, 0.3).is_err());
    assert!(build_dtmc(1, 0.3).is_err());
    let tiny = DtmcOptions {
        max_states: 10,
        ..DtmcOptions::lean()
    };
    assert!(build_dtmc_with(4, 0.3, &tiny).is_err());
}

fn sim_agrees(n: usize, a0: f64, runs: usize, opts: &DtmcOptions) -> (f64, f64, f64) {
    let exact = expected_rounds(&build_dtmc_with(n, a0, opts).unwrap()).unwrap();
    let batch = run_batch(&SimConfig::synchronous(n, Activation::Fixed(a0)), runs, 77, &RunOptions::default()).unwrap();
    (exact, batch.aggregate.time.mean, batch.aggregate.time.std_error())
}

#[test]
fn simulator_matches_chain_within_sampling_error() {
    for (n, a0) in [(2, 0.5), (3, 0.2), (3, 1.0 - 0.5f64.powf(1.0 / 3.0)), (4, 0.1), (4, 0.6)] {
        let (exact, mean, se) = sim_agrees(n, a0, 20_000, &DtmcOptions::lean());
        assert!((mean - exact).abs() < 4.0 * se, "n={n} a0={a0}: {mean} +- {se} vs {exact}");
        if n == 3 {
            assert!((mean - exact).abs() / exact < 0.02);
        }
    }
}

#[test]
fn six_node_simulation_matches_chain() {
    let opts = DtmcOptions {
        allow_large_rings: true,
        ..DtmcOptions::lean()
    };
    let (exact, mean, _) = sim_agrees(6, 0.0545, 100_000, &opts);
    assert!((mean - exact).abs() / exact < 0.02, "{mean} vs {exact}");
}
