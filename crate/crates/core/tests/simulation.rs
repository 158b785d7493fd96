use abe_election::batch::{run_batch, Summary};
use abe_election::monitor::CheckId;
use abe_election::protocol::{on_receive, on_tick, ForwardRule, Node, NodeAction, NodeState};
use abe_election::sim::{run, run_with, Activation, RunOptions, SimConfig, TickMode, TieBreak, TraceKind};
use abe_election::timing::{ClockModel, DelayModel, ProcessingModel};
use abe_election::ElectionError;

fn traced() -> RunOptions {
    RunOptions {
        record_trace: true,
        ..RunOptions::default()
    }
}

#[test]
fn same_seed_same_trace() {
    for cfg in [
        SimConfig::new(7, Activation::Optimal),
        SimConfig::synchronous(5, Activation::Fixed(0.3)),
        SimConfig {
            clock: ClockModel::bounded(0.5, 2.0),
            delay_model: DelayModel::Retransmission { p: 0.5, unit: 0.5 },
            processing: ProcessingModel { gamma: 0.1 },
            delta: 1.5,
            ..SimConfig::new(6, Activation::Fixed(0.05))
        },
    ] {
        for seed in 0..20 {
            let c = cfg.clone().with_seed(seed);
            let a = run_with(&c, &traced()).unwrap();
            let b = run_with(&c, &traced()).unwrap();
            assert_eq!(a.trace_hash, b.trace_hash);
            assert_eq!(a.stats, b.stats);
            assert_eq!(a.trace, b.trace);
        }
    }
}

#[test]
fn different_seeds_give_different_traces() {
    let cfg = SimConfig::new(8, Activation::Optimal);
    let hashes: std::collections::BTreeSet<String> =
        (0..50).map(|s| run(&cfg.clone().with_seed(s)).unwrap().trace_hash).collect();
    assert!(hashes.len() > 45);
}

#[test]
fn unstable_ties_break_reproducibility() {
    let cfg = SimConfig::synchronous(6, Activation::Fixed(0.3));
    let opts = RunOptions {
        tie_break: TieBreak::Unstable,
        ..RunOptions::default()
    };
    let differing = (0..30)
        .filter(|&s| {
            let c = cfg.clone().with_seed(s);
            run_with(&c, &opts).unwrap().trace_hash != run_with(&c, &opts).unwrap().trace_hash
        })
        .count();
    assert!(differing > 0);
}

#[test]
fn monitors_do_not_perturb_runs() {
    let cfg = SimConfig::new(9, Activation::Optimal);
    for seed in 0..100 {
        let c = cfg.clone().with_seed(seed);
        let plain = run(&c).unwrap();
        let watched = run_with(&c, &RunOptions::monitored()).unwrap();
        assert_eq!(plain.stats, watched.stats);
        assert_eq!(plain.trace_hash, watched.trace_hash);
        assert!(watched.violations.is_empty());
    }
}

#[test]
fn exponential_delays_let_messages_overtake() {
    let cfg = SimConfig::new(4, Activation::Fixed(0.4));
    let seed = (0..2000u64)
        .find(|&s| run(&cfg.clone().with_seed(s)).unwrap().overtakes > 0)
        .expect("some seed shows a later message arriving first");
    assert!(run(&cfg.clone().with_seed(seed)).unwrap().overtakes > 0);
}

#[test]
fn deterministic_delays_never_overtake() {
    let cfg = SimConfig::synchronous(5, Activation::Fixed(0.4));
    for seed in 0..200 {
        assert_eq!(run(&cfg.clone().with_seed(seed)).unwrap().overtakes, 0);
    }
}

#[test]
fn runs_end_with_one_leader_and_an_empty_ring() {
    for n in [2, 3, 4, 7, 16] {
        let cfg = SimConfig::new(n, Activation::Optimal);
        for seed in 0..200 {
            let out = run(&cfg.clone().with_seed(seed)).unwrap();
            let ring = &out.final_ring;
            assert!(out.stats.elected);
            assert_eq!(ring.count(NodeState::Leader), 1);
            assert_eq!(ring.count(NodeState::Passive), n - 1);
            assert!(ring.in_flight.is_empty());
            assert_eq!(ring.leader(), out.stats.leader_id);
        }
    }
}

#[test]
fn three_node_ring_always_elects_one_leader() {
    let cfg = SimConfig::new(3, Activation::Fixed(0.3));
    let batch = run_batch(&cfg, 5000, 0, &RunOptions::monitored()).unwrap();
    assert!(batch.records.iter().all(|r| r.stats.elected && r.violations == 0));
}

/// Replays a trace through the protocol functions and counts forwards:
/// deliveries to idle or passive nodes.
fn replay_forwards(n: usize, trace: &[abe_election::sim::TraceRecord]) -> (u64, u64) {
    let mut nodes: Vec<Node> = (0..n).map(Node::new).collect();
    let (mut wakeups, mut forwards) = (0, 0);
    for r in trace {
        let node = nodes[r.node];
        match (r.kind, r.hop) {
            (TraceKind::Tick, Some(_)) => {
                nodes[r.node] = on_tick(node, true).0;
                wakeups += 1;
            }
            (TraceKind::Tick, None) => {}
            (TraceKind::Deliver, Some(hop)) => {
                let msg = abe_election::protocol::Message {
                    hop,
                    knockout: false,
                    msg_id: 0,
                };
                let (next, action) = on_receive(node, msg, n as u32).unwrap();
                if matches!(action, NodeAction::Send(_)) {
                    forwards += 1;
                }
                nodes[r.node] = next;
            }
            (TraceKind::Deliver, None) => panic!("delivery without hop"),
        }
    }
    (wakeups, forwards)
}

#[test]
fn message_accounting() {
    for n in [3, 6, 12] {
        let cfg = SimConfig::new(n, Activation::Optimal);
        for seed in 0..100 {
            let out = run_with(&cfg.clone().with_seed(seed), &traced()).unwrap();
            let s = out.stats;
            let (wakeups, forwards) = replay_forwards(n, &out.trace);
            assert_eq!(wakeups, s.wakeups);
            assert_eq!(s.messages_sent, wakeups + forwards);
            assert!(s.message_hops <= s.wakeups * n as u64);
            let bits_per_hop = (n as f64 + 1.0).log2().ceil() as u64;
            assert_eq!(s.bits, s.message_hops * bits_per_hop);
            assert!(s.ticks >= s.wakeups);
        }
    }
}

#[test]
fn trace_lines_have_five_fields() {
    let out = run_with(&SimConfig::new(4, Activation::Optimal).with_seed(1), &traced()).unwrap();
    assert_eq!(out.trace.len() as u64, out.events);
    for r in &out.trace {
        assert_eq!(r.to_line().split(',').count(), 5);
    }
    let times: Vec<f64> = out.trace.iter().map(|r| r.time).collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
}

fn two_sample_z(a: &Summary, b: &Summary) -> f64 {
    (a.mean - b.mean) / (a.std_error().powi(2) + b.std_error().powi(2)).sqrt()
}

#[test]
fn skipping_idle_ticks_preserves_the_distribution() {
    for cfg in [
        SimConfig::new(5, Activation::Fixed(0.05)),
        SimConfig::synchronous(4, Activation::Fixed(0.2)),
        SimConfig {
            clock: ClockModel::bounded(0.5, 1.5),
            ..SimConfig::new(6, Activation::Optimal)
        },
    ] {
        let per_tick = RunOptions {
            tick_mode: TickMode::PerTick,
            ..RunOptions::default()
        };
        // Disjoint seeds keep the two samples independent.
        let a = run_batch(&cfg, 4000, 0, &per_tick).unwrap().aggregate;
        let b = run_batch(&cfg, 4000, 1_000_000, &RunOptions::default()).unwrap().aggregate;
        for ((name, x), (_, y)) in a.metrics().iter().zip(b.metrics().iter()) {
            let z = two_sample_z(x, y);
            assert!(z.abs() < 4.0, "{name}: per-tick {} vs skip {} (z = {z:.2})", x.mean, y.mean);
        }
    }
}

#[test]
fn mutant_forwarding_trips_the_monitors() {
    let cfg = SimConfig {
        forward_rule: ForwardRule::HopPlusOne,
        ..SimConfig::new(5, Activation::Fixed(0.3))
    };
    let opts = RunOptions {
        abort_on_violation: false,
        ..RunOptions::monitored()
    };
    let found = (0..500u64).find_map(|s| {
        let out = run_with(&cfg.clone().with_seed(s), &opts).ok()?;
        out.violations.iter().any(|v| v.check == CheckId::Cor).then_some(s)
    });
    let seed = found.expect("a seed where the mutant breaks the corollary");
    match run_with(&cfg.clone().with_seed(seed), &RunOptions::monitored()) {
        Err(ElectionError::InvariantViolation { seed: s, .. }) => assert_eq!(s, seed),
        other => panic!("expected an invariant violation, got {other:?}"),
    }
}

#[test]
fn timeout_is_an_error_not_a_silent_stop() {
    let cfg = SimConfig {
        max_global_time: Some(1.0),
        ..SimConfig::new(30, Activation::Fixed(1e-4))
    };
    assert!(matches!(run(&cfg), Err(ElectionError::Timeout { .. })));
}

#[test]
fn invalid_configs_are_rejected() {
    let too_slow = SimConfig {
        delay_model: DelayModel::Exponential { mean: 2.0 },
        ..SimConfig::new(4, Activation::Optimal)
    };
    assert!(run(&too_slow).is_err());
    assert!(run(&SimConfig::new(1, Activation::Optimal)).is_err());
    assert!(run(&SimConfig::new(4, Activation::Fixed(1.0))).is_err());
}
