//! Seeded discrete-event simulator for the election protocol.
//!
//! A run owns one global event queue of clock ticks and message deliveries.
//! Events are processed in `(time, class, seq)` order: at equal global time
//! deliveries precede ticks, and `seq` is assigned when the event is
//! scheduled. Channels are unidirectional (node `i` sends on link `i` to node
//! `i + 1 mod n`) and non-FIFO: every message draws its own delay.

use std::cmp::{Ordering, Reverse};
use std::fmt;
use std::str::FromStr;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::hash::{BuildHasher, RandomState};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::compute_optimal_activation;
use crate::error::{ElectionError, Result};
use crate::monitor::{CheckId, MonitorState, Violation};
use crate::protocol::{
    on_receive_with, on_tick, validate_activation, wake_probability_unchecked, ForwardRule, Message, Node,
    NodeAction, NodeState,
};
use crate::timing::{mean_delay, sample_delay, tick_time, ClockModel, DelayModel, ProcessingModel};

/// Activation parameter of a run: a fixed value or the closed-form optimum
/// for the ring size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Fixed(f64),
    Optimal,
}

impl Activation {
    pub fn resolve(self, n: usize) -> Result<f64> {
        match self {
            Activation::Fixed(a0) => {
                validate_activation(a0)?;
                Ok(a0)
            }
            Activation::Optimal => compute_optimal_activation(n),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Fixed(a0) => write!(f, "{a0}"),
            Activation::Optimal => f.write_str("optimal"),
        }
    }
}

/// `"optimal"` or a number.
impl FromStr for Activation {
    type Err = ElectionError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("optimal") {
            return Ok(Activation::Optimal);
        }
        s.parse()
            .map(Activation::Fixed)
            .map_err(|_| ElectionError::InvalidParameter(format!("activation must be a number or \"optimal\", got {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub a0: Activation,
    /// Known bound on the mean message delay.
    pub delta: f64,
    pub delay_model: DelayModel,
    pub clock: ClockModel,
    pub processing: ProcessingModel,
    pub seed: u64,
    /// Safety horizon; `None` means `1e6 * n * delta`.
    pub max_global_time: Option<f64>,
    pub forward_rule: ForwardRule,
}

impl SimConfig {
    /// Exponential delays with mean `delta = 1`, unit clocks, no processing
    /// latency.
    pub fn new(n: usize, a0: Activation) -> Self {
        SimConfig {
            n,
            a0,
            delta: 1.0,
            delay_model: DelayModel::Exponential { mean: 1.0 },
            clock: ClockModel::unit(),
            processing: ProcessingModel::default(),
            seed: 0,
            max_global_time: None,
            forward_rule: ForwardRule::DeadPlusOne,
        }
    }

    /// Unit delays and unit clocks: the round-based instantiation.
    pub fn synchronous(n: usize, a0: Activation) -> Self {
        SimConfig {
            delay_model: DelayModel::Deterministic(1.0),
            ..Self::new(n, a0)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn activation(&self) -> Result<f64> {
        self.a0.resolve(self.n)
    }

    pub fn horizon(&self) -> f64 {
        self.max_global_time.unwrap_or(1e6 * self.n as f64 * self.delta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(ElectionError::InvalidParameter(format!(
                "ring size must be at least 2, got {}",
                self.n
            )));
        }
        if self.n > u32::MAX as usize / 2 {
            return Err(ElectionError::InvalidParameter(format!("ring size {} too large", self.n)));
        }
        self.activation()?;
        let mean = mean_delay(&self.delay_model)?;
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(ElectionError::InvalidParameter(format!("delta must be > 0, got {}", self.delta)));
        }
        if mean > self.delta * (1.0 + 1e-12) {
            return Err(ElectionError::InvalidParameter(format!(
                "mean delay {mean} of {} exceeds the bound delta = {}",
                self.delay_model, self.delta
            )));
        }
        self.clock.validate()?;
        self.processing.validate()?;
        if !(self.horizon() > 0.0) {
            return Err(ElectionError::InvalidParameter("max_global_time must be > 0".into()));
        }
        Ok(())
    }
}

/// How idle nodes' clock ticks are realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TickMode {
    /// One event per tick of every non-passive node; each idle tick draws
    /// the wake-up gamble.
    PerTick,
    /// An idle node's dead counter is fixed until it leaves the idle state,
    /// so the tick of its first successful gamble is drawn directly as
    /// `first + Geometric(q)`. Same distribution, far fewer events.
    #[default]
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub monitors: BTreeSet<CheckId>,
    /// Turn the first violation into an error instead of collecting.
    pub abort_on_violation: bool,
    pub record_trace: bool,
    pub tick_mode: TickMode,
    pub tie_break: TieBreak,
}

/// Order of events scheduled for the same global time and class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Scheduling order.
    #[default]
    Sequence,
    /// A hash of the sequence number keyed by a fresh `RandomState`, so the
    /// order changes from run to run. Deliberately broken; used to confirm
    /// that the determinism check notices.
    Unstable,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            monitors: BTreeSet::new(),
            abort_on_violation: true,
            record_trace: false,
            tick_mode: TickMode::Skip,
            tie_break: TieBreak::Sequence,
        }
    }
}

impl RunOptions {
    pub fn monitored() -> Self {
        RunOptions {
            monitors: CheckId::ALL.into_iter().collect(),
            ..Self::default()
        }
    }
}

/// A message on a link, waiting for delivery to `(link + 1) mod n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InFlight {
    pub link: usize,
    pub message: Message,
    pub deliver_at: f64,
}

/// Global state observed by the monitors: nodes plus in-flight messages
/// keyed by message identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingConfiguration {
    pub nodes: Vec<Node>,
    pub in_flight: BTreeMap<u64, InFlight>,
}

impl RingConfiguration {
    pub fn new(nodes: Vec<Node>) -> Self {
        RingConfiguration {
            nodes,
            in_flight: BTreeMap::new(),
        }
    }

    pub fn initial(n: usize) -> Self {
        Self::new((0..n).map(Node::new).collect())
    }

    pub fn insert(&mut self, m: InFlight) {
        let prev = self.in_flight.insert(m.message.msg_id, m);
        debug_assert!(prev.is_none(), "message {} already in flight", m.message.msg_id);
    }

    pub fn remove(&mut self, msg_id: u64) -> Option<InFlight> {
        self.in_flight.remove(&msg_id)
    }

    pub fn count(&self, state: NodeState) -> usize {
        self.nodes.iter().filter(|x| x.state == state).count()
    }

    pub fn leader(&self) -> Option<usize> {
        self.nodes.iter().position(|x| x.state == NodeState::Leader)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub elected: bool,
    pub leader_id: Option<usize>,
    pub time_to_election: f64,
    /// Originated plus forwarded messages.
    pub messages_sent: u64,
    /// Link traversals, i.e. deliveries.
    pub message_hops: u64,
    pub wakeups: u64,
    /// Wake-up gambles performed by idle nodes.
    pub ticks: u64,
    pub bits: u64,
}

/// Bits per hop counter on a ring of size `n`.
pub fn hop_bits(n: usize) -> u64 {
    (usize::BITS - n.leading_zeros()) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Tick,
    Deliver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: f64,
    pub seq: u64,
    pub kind: TraceKind,
    pub node: usize,
    /// Hop of the delivered message, or of the message a tick emitted.
    pub hop: Option<u32>,
}

impl TraceRecord {
    pub fn to_line(&self) -> String {
        let kind = match self.kind {
            TraceKind::Tick => "tick",
            TraceKind::Deliver => "deliver",
        };
        let hop = self.hop.map(|h| h.to_string()).unwrap_or_default();
        format!("{},{},{},{},{}", self.time, self.seq, kind, self.node, hop)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub stats: RunStats,
    pub violations: Vec<Violation>,
    /// SHA-256 over every processed event, hex encoded.
    pub trace_hash: String,
    pub trace: Vec<TraceRecord>,
    /// Deliveries of a message sent earlier than the previously delivered
    /// message on the same link.
    pub overtakes: u64,
    pub final_ring: RingConfiguration,
    pub events: u64,
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    /// `k`-th tick of `node`. `generation` invalidates stale skip-mode wakes.
    Tick { node: usize, k: u64, generation: u64 },
    Deliver { link: usize, msg_id: u64 },
}

impl EventKind {
    fn class(&self) -> u8 {
        match self {
            EventKind::Deliver { .. } => 0,
            EventKind::Tick { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    /// Tie-break key; equals `seq` unless ties are deliberately unstable.
    rank: u64,
    kind: EventKind,
}

impl Event {
    fn key(&self) -> (f64, u8, u64) {
        (self.time, self.kind.class(), self.rank)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, ca, sa) = self.key();
        let (tb, cb, sb) = other.key();
        ta.total_cmp(&tb).then(ca.cmp(&cb)).then(sa.cmp(&sb))
    }
}

/// Runs one election with default options (no monitors, skip-mode ticks).
pub fn run(config: &SimConfig) -> Result<RunOutcome> {
    run_with(config, &RunOptions::default())
}

pub fn run_with(config: &SimConfig, options: &RunOptions) -> Result<RunOutcome> {
    config.validate()?;
    Engine::new(config, options)?.run()
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    opts: &'a RunOptions,
    n: usize,
    a0: f64,
    horizon: f64,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
    unstable_ties: Option<RandomState>,
    next_msg_id: u64,
    ring: RingConfiguration,
    speeds: Vec<f64>,
    /// Skip mode: first tick index of the current idle period.
    idle_since: Vec<u64>,
    generation: Vec<u64>,
    last_sent_on_link: Vec<f64>,
    sent_at: BTreeMap<u64, f64>,
    stats: RunStats,
    hasher: Sha256,
    trace: Vec<TraceRecord>,
    monitor: Option<MonitorState>,
    overtakes: u64,
    events: u64,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig, opts: &'a RunOptions) -> Result<Self> {
        let n = cfg.n;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let speeds = cfg.clock.realize_speeds(n, &mut rng);
        let monitor = (!opts.monitors.is_empty()).then(|| MonitorState::new(n, opts.monitors.iter().copied()));
        Ok(Engine {
            cfg,
            opts,
            n,
            a0: cfg.activation()?,
            horizon: cfg.horizon(),
            rng,
            queue: BinaryHeap::new(),
            next_seq: 0,
            unstable_ties: (opts.tie_break == TieBreak::Unstable).then(RandomState::new),
            next_msg_id: 0,
            ring: RingConfiguration::initial(n),
            speeds,
            idle_since: vec![1; n],
            generation: vec![0; n],
            last_sent_on_link: vec![f64::NEG_INFINITY; n],
            sent_at: BTreeMap::new(),
            stats: RunStats::default(),
            hasher: Sha256::new(),
            trace: Vec::new(),
            monitor,
            overtakes: 0,
            events: 0,
        })
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        let rank = self.unstable_ties.as_ref().map_or(seq, |h| h.hash_one(seq));
        self.queue.push(Reverse(Event { time, seq, rank, kind }));
    }

    fn run(mut self) -> Result<RunOutcome> {
        for node in 0..self.n {
            match self.opts.tick_mode {
                TickMode::PerTick => {
                    let t = tick_time(1, self.speeds[node]);
                    self.schedule(t, EventKind::Tick { node, k: 1, generation: 0 });
                }
                TickMode::Skip => self.schedule_wake(node, 0.0),
            }
        }
        if let Some(m) = self.monitor.as_mut() {
            m.observe(0, &self.ring);
        }

        while let Some(Reverse(ev)) = self.queue.pop() {
            if ev.time > self.horizon {
                return Err(ElectionError::Timeout {
                    seed: self.cfg.seed,
                    time: ev.time,
                    events: self.events,
                });
            }
            match ev.kind {
                EventKind::Tick { node, k, generation } => self.handle_tick(ev, node, k, generation),
                EventKind::Deliver { link, msg_id } => self.handle_deliver(ev, link, msg_id)?,
            }
            self.check_abort()?;
            if self.stats.elected {
                break;
            }
        }

        if !self.stats.elected {
            return Err(ElectionError::ProtocolViolation(format!(
                "event queue drained without election (seed {})",
                self.cfg.seed
            )));
        }
        self.stats.bits = self.stats.message_hops * hop_bits(self.n);
        Ok(RunOutcome {
            stats: self.stats,
            violations: self.monitor.map(MonitorState::into_violations).unwrap_or_default(),
            trace_hash: hex(&self.hasher.finalize()),
            trace: self.trace,
            overtakes: self.overtakes,
            final_ring: self.ring,
            events: self.events,
        })
    }

    fn check_abort(&self) -> Result<()> {
        if !self.opts.abort_on_violation {
            return Ok(());
        }
        match self.monitor.as_ref().map(MonitorState::violations) {
            Some([first, ..]) => Err(ElectionError::InvariantViolation {
                seed: self.cfg.seed,
                first: Box::new(first.clone()),
                count: self.monitor.as_ref().map_or(0, |m| m.violations().len()),
            }),
            _ => Ok(()),
        }
    }

    fn record(&mut self, ev: &Event, kind: TraceKind, node: usize, hop: Option<u32>) {
        self.events += 1;
        self.hasher.update(ev.time.to_bits().to_le_bytes());
        self.hasher.update(ev.seq.to_le_bytes());
        self.hasher.update([kind as u8]);
        self.hasher.update((node as u64).to_le_bytes());
        self.hasher.update(hop.unwrap_or(0).to_le_bytes());
        if self.opts.record_trace {
            self.trace.push(TraceRecord {
                time: ev.time,
                seq: ev.seq,
                kind,
                node,
                hop,
            });
        }
    }

    /// Smallest tick index of `node` whose global time is at least `t`.
    fn first_tick_at_or_after(&self, node: usize, t: f64) -> u64 {
        let s = self.speeds[node];
        let mut k = ((t * s).ceil() as u64).max(1);
        while k > 1 && tick_time(k - 1, s) >= t {
            k -= 1;
        }
        while tick_time(k, s) < t {
            k += 1;
        }
        k
    }

    /// Skip mode: node has just become idle at time `t`.
    fn schedule_wake(&mut self, node: usize, t: f64) {
        let first = self.first_tick_at_or_after(node, t);
        let q = wake_probability_unchecked(self.ring.nodes[node].dead, self.a0);
        let failures = if q >= 1.0 {
            0
        } else {
            Geometric::new(q).expect("wake probability in (0, 1)").sample(&mut self.rng)
        };
        self.idle_since[node] = first;
        self.generation[node] += 1;
        let k = first.saturating_add(failures);
        let generation = self.generation[node];
        self.schedule(tick_time(k, self.speeds[node]), EventKind::Tick { node, k, generation });
    }

    fn handle_tick(&mut self, ev: Event, node: usize, k: u64, generation: u64) {
        let before = self.ring.nodes[node];
        let woke = match self.opts.tick_mode {
            TickMode::PerTick => {
                if before.state.is_passive() || before.state == NodeState::Leader {
                    return;
                }
                let next = tick_time(k + 1, self.speeds[node]);
                self.schedule(next, EventKind::Tick { node, k: k + 1, generation });
                if before.state != NodeState::Idle {
                    self.record(&ev, TraceKind::Tick, node, None);
                    return;
                }
                self.stats.ticks += 1;
                let q = wake_probability_unchecked(before.dead, self.a0);
                self.rng.random::<f64>() < q
            }
            TickMode::Skip => {
                if generation != self.generation[node] || before.state != NodeState::Idle {
                    return;
                }
                self.stats.ticks += k - self.idle_since[node] + 1;
                true
            }
        };

        let (after, action) = on_tick(before, woke);
        self.ring.nodes[node] = after;
        match action {
            NodeAction::Send(m) => {
                self.record(&ev, TraceKind::Tick, node, Some(m.hop));
                self.stats.wakeups += 1;
                let msg_id = self.next_msg_id;
                self.next_msg_id += 1;
                self.send(ev.time, node, Message { msg_id, ..m });
                if let Some(mon) = self.monitor.as_mut() {
                    mon.observe(ev.seq, &self.ring);
                }
            }
            _ => self.record(&ev, TraceKind::Tick, node, None),
        }
    }

    fn send(&mut self, now: f64, from: usize, message: Message) {
        self.stats.messages_sent += 1;
        let delay = sample_delay(&self.cfg.delay_model, &mut self.rng) + self.cfg.processing.gamma;
        let deliver_at = now + delay;
        self.ring.insert(InFlight {
            link: from,
            message,
            deliver_at,
        });
        self.sent_at.insert(message.msg_id, now);
        self.schedule(deliver_at, EventKind::Deliver { link: from, msg_id: message.msg_id });
    }

    fn handle_deliver(&mut self, ev: Event, link: usize, msg_id: u64) -> Result<()> {
        let target = (link + 1) % self.n;
        let inflight = self
            .ring
            .remove(msg_id)
            .ok_or_else(|| ElectionError::ProtocolViolation(format!("message {msg_id} delivered twice")))?;
        debug_assert_eq!(inflight.link, link);
        let sent = self.sent_at.remove(&msg_id).unwrap_or(ev.time);
        if sent < self.last_sent_on_link[link] {
            self.overtakes += 1;
        }
        self.last_sent_on_link[link] = self.last_sent_on_link[link].max(sent);

        self.stats.message_hops += 1;
        self.record(&ev, TraceKind::Deliver, target, Some(inflight.message.hop));

        let before = self.ring.nodes[target];
        let (after, action) = on_receive_with(self.cfg.forward_rule, before, inflight.message, self.n as u32)?;
        self.ring.nodes[target] = after;

        if self.opts.tick_mode == TickMode::Skip && before.state == NodeState::Idle {
            // knocked out: account for the gambles it made before this delivery
            let upto = self.first_tick_at_or_after(target, ev.time);
            self.stats.ticks += upto - self.idle_since[target];
            self.generation[target] += 1;
        }

        match action {
            NodeAction::Send(m) => self.send(ev.time, target, m),
            NodeAction::BecomeLeader => {
                self.stats.elected = true;
                self.stats.leader_id = Some(target);
                self.stats.time_to_election = ev.time;
            }
            NodeAction::Purge => {
                if self.opts.tick_mode == TickMode::Skip {
                    self.schedule_wake(target, ev.time);
                }
            }
            NodeAction::None => {}
        }

        if let Some(mon) = self.monitor.as_mut() {
            mon.observe_delivery(ev.seq, &before, &self.ring);
            mon.observe(ev.seq, &self.ring);
        }
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hop_bits_is_ceil_log2_of_n_plus_one() {
        for (n, bits) in [(1, 1), (2, 2), (3, 2), (4, 3), (7, 3), (8, 4), (100, 7), (620, 10)] {
            assert_eq!(hop_bits(n), bits, "n={n}");
            assert_eq!(bits, ((n + 1) as f64).log2().ceil() as u64);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let ok = SimConfig::new(5, Activation::Fixed(0.3));
        assert!(ok.validate().is_ok());
        assert!(SimConfig::new(1, Activation::Fixed(0.3)).validate().is_err());
        assert!(SimConfig::new(5, Activation::Fixed(1.0)).validate().is_err());
        let slow = SimConfig {
            delay_model: DelayModel::Exponential { mean: 2.0 },
            ..ok.clone()
        };
        assert!(slow.validate().is_err());
        let neg_gamma = SimConfig {
            processing: ProcessingModel { gamma: -1.0 },
            ..ok
        };
        assert!(neg_gamma.validate().is_err());
    }

    #[test]
    fn smallest_ring_elects() {
        let mut elected = 0;
        for seed in 0..200 {
            let cfg = SimConfig::synchronous(2, Activation::Fixed(0.9)).with_seed(seed);
            let out = run_with(&cfg, &RunOptions::monitored()).unwrap();
            assert!(out.stats.elected);
            assert_eq!(out.final_ring.count(NodeState::Leader), 1);
            assert_eq!(out.final_ring.count(NodeState::Passive), 1);
            elected += 1;
        }
        assert_eq!(elected, 200);
    }

    #[test]
    fn equal_time_deliveries_precede_ticks() {
        let tick = Event {
            time: 2.0,
            seq: 0,
            rank: 0,
            kind: EventKind::Tick { node: 0, k: 2, generation: 0 },
        };
        let deliver = Event {
            time: 2.0,
            seq: 5,
            rank: 5,
            kind: EventKind::Deliver { link: 1, msg_id: 0 },
        };
        assert!(deliver < tick);
        let earlier_tick = Event { time: 1.5, ..tick };
        assert!(earlier_tick < deliver);
    }

    #[test]
    fn timeout_is_reported() {
        let cfg = SimConfig {
            max_global_time: Some(0.5),
            ..SimConfig::new(4, Activation::Fixed(0.01))
        };
        assert!(matches!(run(&cfg), Err(ElectionError::Timeout { .. })));
    }

    #[test]
    fn first_tick_lookup() {
        let cfg = SimConfig {
            clock: ClockModel::bounded(0.5, 2.0),
            ..SimConfig::new(3, Activation::Fixed(0.2))
        };
        let opts = RunOptions::default();
        let mut e = Engine::new(&cfg, &opts).unwrap();
        e.speeds = vec![1.0, 2.0, 0.5];
        assert_eq!(e.first_tick_at_or_after(0, 0.0), 1);
        assert_eq!(e.first_tick_at_or_after(0, 3.0), 3);
        assert_eq!(e.first_tick_at_or_after(0, 3.2), 4);
        assert_eq!(e.first_tick_at_or_after(1, 1.0), 2);
        assert_eq!(e.first_tick_at_or_after(1, 1.1), 3);
        assert_eq!(e.first_tick_at_or_after(2, 3.9), 2);
        assert_eq!(e.first_tick_at_or_after(2, 4.0), 2);
    }
}
