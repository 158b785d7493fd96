//! The monitor checks against direct quadratic-time restatements.

use std::collections::BTreeSet;

use abe_election::dtmc::build_dtmc;
use abe_election::monitor::{check_all, check_max_wake_elected, check_segments, CheckId};
use abe_election::protocol::{Message, Node, NodeState};
use abe_election::sim::{InFlight, RingConfiguration};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive(ring: &RingConfiguration) -> BTreeSet<CheckId> {
    let nodes = &ring.nodes;
    let n = nodes.len();
    let msgs: Vec<&InFlight> = ring.in_flight.values().collect();
    let mut fired = BTreeSet::new();
    let pred = |i: usize, k: usize| (i + n * k - k) % n;

    for (i, a) in nodes.iter().enumerate() {
        if (1..a.dead as usize).any(|k| nodes[pred(i, k)].state != NodeState::Passive) {
            fired.insert(CheckId::L1);
        }
    }
    if let Some(l) = nodes.iter().position(|x| x.state == NodeState::Leader) {
        let others_passive = nodes
            .iter()
            .enumerate()
            .all(|(i, x)| i == l || x.state == NodeState::Passive);
        if !others_passive || !msgs.is_empty() {
            fired.insert(CheckId::L2);
        }
    }
    if msgs.len() != nodes.iter().filter(|x| x.state == NodeState::Active).count() {
        fired.insert(CheckId::L3);
    }
    if nodes.iter().all(|x| x.state == NodeState::Passive) {
        fired.insert(CheckId::L4);
    }
    if msgs.iter().any(|m| m.message.hop < 1 || m.message.hop as usize > n) {
        fired.insert(CheckId::HopCap);
    }

    for a in 0..n {
        if nodes[a].state == NodeState::Passive {
            continue;
        }
        let b = (1..=n)
            .map(|k| (a + k) % n)
            .find(|&j| nodes[j].state != NodeState::Passive)
            .unwrap();
        // links a, a+1, ..., b-1 (all n links when b == a)
        let span = if b == a { n } else { (b + n - a) % n };
        let links: Vec<usize> = (0..span).map(|k| (a + k) % n).collect();
        let on_segment: Vec<&&InFlight> = msgs.iter().filter(|m| links.contains(&m.link)).collect();
        let expected = nodes[a].wake_count as i64 - nodes[b].wake_count as i64
            + i64::from(nodes[b].state == NodeState::Active);
        if on_segment.len() as i64 != expected {
            fired.insert(CheckId::L5);
        }
        if on_segment.iter().all(|m| !m.message.knockout) && span as u32 - 1 != nodes[b].dead - 1 {
            fired.insert(CheckId::L6);
        }
    }
    let any_passive_free = nodes.iter().any(|x| x.state != NodeState::Passive);
    if any_passive_free && msgs.iter().all(|m| !m.message.knockout) {
        let total: u32 = nodes
            .iter()
            .filter(|x| x.state != NodeState::Passive)
            .map(|x| x.dead)
            .sum();
        if total as usize != n {
            fired.insert(CheckId::Cor);
        }
    }
    fired
}

fn library(ring: &RingConfiguration) -> BTreeSet<CheckId> {
    let n = ring.nodes.len();
    check_all(ring, n)
        .into_iter()
        .chain(check_segments(ring))
        .map(|f| f.check)
        .collect()
}

fn random_ring(rng: &mut impl Rng, n: usize) -> RingConfiguration {
    let nodes: Vec<Node> = (0..n)
        .map(|id| Node {
            id,
            state: match rng.random_range(0..10) {
                0..=3 => NodeState::Passive,
                4..=6 => NodeState::Idle,
                7..=8 => NodeState::Active,
                _ => NodeState::Leader,
            },
            dead: rng.random_range(1..=n as u32),
            wake_count: rng.random_range(0..3),
        })
        .collect();
    let mut ring = RingConfiguration::new(nodes);
    for msg_id in 0..rng.random_range(0..=n as u64) {
        ring.insert(InFlight {
            link: rng.random_range(0..n),
            message: Message {
                hop: rng.random_range(1..=n as u32 + 1),
                knockout: rng.random_bool(0.3),
                msg_id,
            },
            deliver_at: 0.0,
        });
    }
    ring
}

#[test]
fn checks_agree_with_naive_oracle_on_random_rings() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut seen = BTreeSet::new();
    for _ in 0..20_000 {
        let n = rng.random_range(2..=7);
        let ring = random_ring(&mut rng, n);
        let want = naive(&ring);
        assert_eq!(library(&ring), want, "ring {ring:?}");
        seen.extend(want);
    }
    // every check was exercised both ways
    let all: BTreeSet<CheckId> = [
        CheckId::L1,
        CheckId::L2,
        CheckId::L3,
        CheckId::L4,
        CheckId::L5,
        CheckId::L6,
        CheckId::Cor,
        CheckId::HopCap,
    ]
    .into();
    assert_eq!(seen, all);
}

#[test]
fn reachable_states_are_clean_for_both() {
    for n in [3, 4, 5] {
        let model = build_dtmc(n, 0.3).unwrap();
        for s in &model.states {
            let ring = s.to_ring();
            assert!(naive(&ring).is_empty(), "{s}");
            assert!(library(&ring).is_empty(), "{s}");
        }
    }
}

#[test]
fn strict_wake_maximum_must_win() {
    let node = |id, state, wake_count| Node {
        id,
        state,
        dead: 1,
        wake_count,
    };
    let before = node(0, NodeState::Active, 2);
    let others = [before, node(1, NodeState::Idle, 0)];
    let purged = node(0, NodeState::Idle, 2);
    let elected = node(0, NodeState::Leader, 2);
    assert_eq!(
        check_max_wake_elected(&before, &purged, &others).map(|f| f.check),
        Some(CheckId::LIdle)
    );
    assert!(check_max_wake_elected(&before, &elected, &others).is_none());
    let tied = [before, node(1, NodeState::Idle, 2)];
    assert!(check_max_wake_elected(&before, &purged, &tied).is_none());
}
