//! Exact analysis of small rings under synchronous unit-delay scheduling.
//!
//! One global step: every in-flight message advances one link and is
//! processed by its receiver, then every idle node gambles independently.
//! All randomness comes from the gambles, so the reachable configurations
//! form a finite discrete-time Markov chain. Leader states are absorbing.
//!
//! With `track_metadata` the state also carries knockout flags and wake
//! counts so that every monitor check can be evaluated exhaustively. Wake
//! counts are stored relative to the smallest non-passive count (passive
//! counts below that are clamped to -1), which keeps the space finite
//! without changing the outcome of any check.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::error::{ElectionError, Result};
use crate::monitor::{check_all, check_max_wake_elected, check_segments, Finding};
use crate::protocol::{
    on_receive_with, on_tick, validate_activation, wake_probability_unchecked, ForwardRule, Message, Node,
    NodeAction, NodeState,
};
use crate::sim::{InFlight, RingConfiguration};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DtmcOptions {
    pub track_metadata: bool,
    pub forward_rule: ForwardRule,
    pub max_states: usize,
    /// Lift the `n <= 5` guard (up to `n = 7`).
    pub allow_large_rings: bool,
}

impl Default for DtmcOptions {
    fn default() -> Self {
        DtmcOptions {
            track_metadata: true,
            forward_rule: ForwardRule::DeadPlusOne,
            max_states: 4_000_000,
            allow_large_rings: false,
        }
    }
}

impl DtmcOptions {
    /// Protocol state only; the smallest chain with the same election-time
    /// distribution.
    pub fn lean() -> Self {
        DtmcOptions {
            track_metadata: false,
            ..Self::default()
        }
    }
}

/// Message occupying a link. Synchronous unit delays never put two messages
/// on the same link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct LinkMessage {
    pub hop: u32,
    pub knockout: bool,
}

const NODE_BYTES: usize = 3;
const LINK_BYTES: usize = 2;

/// Canonical byte encoding of a global configuration: per node
/// `(state, dead, wake + 1)`, then per link `(hop or 0, knockout)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalState(Box<[u8]>);

impl GlobalState {
    fn encode(nodes: &[Node], links: &[Option<LinkMessage>], track_metadata: bool) -> Result<Self> {
        let n = nodes.len();
        let mut bytes = Vec::with_capacity(n * (NODE_BYTES + LINK_BYTES));
        let floor = nodes
            .iter()
            .filter(|x| !x.state.is_passive())
            .map(|x| x.wake_count as i64)
            .min()
            .unwrap_or(0);
        let byte = |v: i64, what: &str| {
            u8::try_from(v).map_err(|_| ElectionError::InvalidModel(format!("{what} {v} does not fit the encoding")))
        };
        for x in nodes {
            bytes.push(state_code(x.state));
            bytes.push(byte(x.dead as i64, "dead counter")?);
            let wake = if track_metadata {
                let rel = x.wake_count as i64 - floor;
                if x.state.is_passive() {
                    rel.max(-1) + 1
                } else {
                    rel + 1
                }
            } else {
                0
            };
            bytes.push(byte(wake, "relative wake count")?);
        }
        for link in links {
            match link {
                Some(m) => {
                    bytes.push(byte(m.hop as i64, "hop")?);
                    bytes.push(u8::from(track_metadata && m.knockout));
                }
                None => bytes.extend([0, 0]),
            }
        }
        Ok(GlobalState(bytes.into_boxed_slice()))
    }

    pub fn ring_size(&self) -> usize {
        self.0.len() / (NODE_BYTES + LINK_BYTES)
    }

    /// Nodes with wake counts shifted to be non-negative.
    pub fn nodes(&self) -> Vec<Node> {
        let n = self.ring_size();
        (0..n)
            .map(|id| {
                let b = &self.0[id * NODE_BYTES..(id + 1) * NODE_BYTES];
                Node {
                    id,
                    state: decode_state(b[0]),
                    dead: b[1] as u32,
                    wake_count: b[2] as u32,
                }
            })
            .collect()
    }

    pub fn links(&self) -> Vec<Option<LinkMessage>> {
        let n = self.ring_size();
        let base = n * NODE_BYTES;
        (0..n)
            .map(|i| {
                let b = &self.0[base + i * LINK_BYTES..base + (i + 1) * LINK_BYTES];
                (b[0] != 0).then_some(LinkMessage {
                    hop: b[0] as u32,
                    knockout: b[1] != 0,
                })
            })
            .collect()
    }

    /// The configuration as the monitors see it; the message on link `i`
    /// gets identity `i`.
    pub fn to_ring(&self) -> RingConfiguration {
        let mut ring = RingConfiguration::new(self.nodes());
        for (link, m) in self.links().into_iter().enumerate() {
            if let Some(m) = m {
                ring.insert(InFlight {
                    link,
                    message: Message {
                        hop: m.hop,
                        knockout: m.knockout,
                        msg_id: link as u64,
                    },
                    deliver_at: 0.0,
                });
            }
        }
        ring
    }

    pub fn has_leader(&self) -> bool {
        self.nodes().iter().any(|x| x.state == NodeState::Leader)
    }
}

impl fmt::Display for GlobalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (x, link) in self.nodes().iter().zip(self.links()) {
            let s = match x.state {
                NodeState::Idle => 'I',
                NodeState::Active => 'A',
                NodeState::Passive => 'P',
                NodeState::Leader => 'L',
            };
            write!(f, "{s}{}w{}", x.dead, x.wake_count)?;
            match link {
                Some(m) => write!(f, " -<{}{}>- ", m.hop, if m.knockout { "k" } else { "" })?,
                None => write!(f, " --- ")?,
            }
        }
        Ok(())
    }
}

fn state_code(s: NodeState) -> u8 {
    match s {
        NodeState::Idle => 0,
        NodeState::Active => 1,
        NodeState::Passive => 2,
        NodeState::Leader => 3,
    }
}

fn decode_state(b: u8) -> NodeState {
    match b {
        0 => NodeState::Idle,
        1 => NodeState::Active,
        2 => NodeState::Passive,
        _ => NodeState::Leader,
    }
}

/// A finding raised on a transition rather than a configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionFinding {
    pub from: usize,
    pub finding: Finding,
}

#[derive(Debug, Clone)]
pub struct DtmcModel {
    pub n: usize,
    pub a0: f64,
    pub options: DtmcOptions,
    /// Index 0 is the all-idle initial configuration.
    pub states: Vec<GlobalState>,
    /// Sparse rows `(target, probability)`, sorted by target.
    pub transitions: Vec<Vec<(u32, f64)>>,
    pub absorbing: Vec<bool>,
    /// Invariant checks evaluated on deliveries during construction.
    pub transition_findings: Vec<TransitionFinding>,
}

impl DtmcModel {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }

    /// Row-stochasticity and absorbing-state structure.
    pub fn validate(&self) -> Result<()> {
        let len = self.states.len();
        if self.transitions.len() != len || self.absorbing.len() != len || len == 0 {
            return Err(ElectionError::InvalidModel("inconsistent table sizes".into()));
        }
        for (i, row) in self.transitions.iter().enumerate() {
            let sum: f64 = row.iter().map(|&(_, p)| p).sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(ElectionError::InvalidModel(format!("row {i} sums to {sum}")));
            }
            if row.iter().any(|&(t, p)| t as usize >= len || !(p >= 0.0)) {
                return Err(ElectionError::InvalidModel(format!("row {i} has a bad entry")));
            }
            if self.absorbing[i] && row.as_slice() != [(i as u32, 1.0)] {
                return Err(ElectionError::InvalidModel(format!("absorbing state {i} is not a self-loop")));
            }
        }
        Ok(())
    }

    /// Distribution over states after `steps` steps from the initial state.
    pub fn transient_distribution(&self, steps: usize) -> Vec<f64> {
        let mut dist = vec![0.0; self.states.len()];
        dist[0] = 1.0;
        for _ in 0..steps {
            let mut next = vec![0.0; dist.len()];
            for (i, row) in self.transitions.iter().enumerate() {
                if dist[i] == 0.0 {
                    continue;
                }
                for &(t, p) in row {
                    next[t as usize] += dist[i] * p;
                }
            }
            dist = next;
        }
        dist
    }
}

/// Builds the reachable chain with default options.
pub fn build_dtmc(n: usize, a0: f64) -> Result<DtmcModel> {
    build_dtmc_with(n, a0, &DtmcOptions::default())
}

pub fn build_dtmc_with(n: usize, a0: f64, options: &DtmcOptions) -> Result<DtmcModel> {
    let max_n = if options.allow_large_rings { 7 } else { 5 };
    if !(2..=max_n).contains(&n) {
        return Err(ElectionError::InvalidParameter(format!("ring size {n} outside 2..={max_n}")));
    }
    validate_activation(a0)?;

    let initial_nodes: Vec<Node> = (0..n).map(Node::new).collect();
    let initial = GlobalState::encode(&initial_nodes, &vec![None; n], options.track_metadata)?;

    let mut index: HashMap<GlobalState, u32> = HashMap::new();
    let mut model = DtmcModel {
        n,
        a0,
        options: *options,
        states: Vec::new(),
        transitions: Vec::new(),
        absorbing: Vec::new(),
        transition_findings: Vec::new(),
    };
    index.insert(initial.clone(), 0);
    model.states.push(initial);

    let mut cursor = 0;
    while cursor < model.states.len() {
        let state = model.states[cursor].clone();
        if state.has_leader() {
            model.absorbing.push(true);
            model.transitions.push(vec![(cursor as u32, 1.0)]);
            cursor += 1;
            continue;
        }
        let (successors, findings) = step(&state, n, a0, options)?;
        model
            .transition_findings
            .extend(findings.into_iter().map(|finding| TransitionFinding { from: cursor, finding }));

        let mut row: Vec<(u32, f64)> = Vec::with_capacity(successors.len());
        for (next, p) in successors {
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    let id = model.states.len() as u32;
                    if model.states.len() >= options.max_states {
                        return Err(ElectionError::StateSpaceOverflow {
                            states: model.states.len(),
                            limit: options.max_states,
                        });
                    }
                    index.insert(next.clone(), id);
                    model.states.push(next);
                    id
                }
            };
            row.push((id, p));
        }
        row.sort_by_key(|&(t, _)| t);
        row.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        model.absorbing.push(false);
        model.transitions.push(row);
        cursor += 1;
    }
    Ok(model)
}

type Successors = Vec<(GlobalState, f64)>;

/// One synchronous step from a non-absorbing state.
fn step(state: &GlobalState, n: usize, a0: f64, options: &DtmcOptions) -> Result<(Successors, Vec<Finding>)> {
    let mut nodes = state.nodes();
    let links = state.links();
    let mut next_links: Vec<Option<LinkMessage>> = vec![None; n];
    let mut findings = Vec::new();
    let mut elected = false;

    let before = nodes.clone();
    for (link, m) in links.iter().enumerate() {
        let Some(m) = m else { continue };
        let target = (link + 1) % n;
        let msg = Message {
            hop: m.hop,
            knockout: m.knockout,
            msg_id: link as u64,
        };
        let (after, action) = on_receive_with(options.forward_rule, before[target], msg, n as u32)?;
        nodes[target] = after;
        if options.track_metadata {
            if let Some(f) = check_max_wake_elected(&before[target], &after, &before) {
                findings.push(f);
            }
        }
        match action {
            NodeAction::Send(out) => {
                next_links[target] = Some(LinkMessage {
                    hop: out.hop,
                    knockout: out.knockout,
                });
            }
            NodeAction::BecomeLeader => elected = true,
            NodeAction::Purge | NodeAction::None => {}
        }
    }

    if elected {
        let s = GlobalState::encode(&nodes, &next_links, options.track_metadata)?;
        return Ok((vec![(s, 1.0)], findings));
    }

    let idle: Vec<usize> = (0..n).filter(|&i| nodes[i].state == NodeState::Idle).collect();
    let wake: Vec<f64> = idle
        .iter()
        .map(|&i| wake_probability_unchecked(nodes[i].dead, a0))
        .collect();

    let mut out = Vec::with_capacity(1 << idle.len());
    for mask in 0u32..(1 << idle.len()) {
        let mut p = 1.0;
        let mut ns = nodes.clone();
        let mut ls = next_links.clone();
        for (bit, &i) in idle.iter().enumerate() {
            let woke = mask & (1 << bit) != 0;
            p *= if woke { wake[bit] } else { 1.0 - wake[bit] };
            let (after, action) = on_tick(ns[i], woke);
            ns[i] = after;
            if let NodeAction::Send(m) = action {
                if ls[i].is_some() {
                    return Err(ElectionError::InvalidModel(format!("link {i} would carry two messages")));
                }
                ls[i] = Some(LinkMessage {
                    hop: m.hop,
                    knockout: m.knockout,
                });
            }
        }
        if p > 0.0 {
            out.push((GlobalState::encode(&ns, &ls, options.track_metadata)?, p));
        }
    }
    Ok((out, findings))
}

/// Probability of eventually electing a leader from the initial state.
///
/// States that cannot reach a leader state (probability 0) and states that
/// reach one almost surely (probability 1) are identified on the transition
/// graph first; the absorption equations are then solved by Gauss-Seidel on
/// the remaining states until the residual drops below `1e-12`.
pub fn termination_probability(model: &DtmcModel) -> Result<f64> {
    Ok(absorption_probabilities(model)?[0])
}

pub fn absorption_probabilities(model: &DtmcModel) -> Result<Vec<f64>> {
    model.validate()?;
    let len = model.states.len();
    let preds = predecessors(model);

    let can_reach = backward_closure(&preds, model.absorbing.clone(), |_| true);
    let never: Vec<bool> = can_reach.iter().map(|&r| !r).collect();
    let may_fail = backward_closure(&preds, never.clone(), |s| !model.absorbing[s]);

    let mut x: Vec<f64> = (0..len)
        .map(|s| if model.absorbing[s] || !may_fail[s] { 1.0 } else { 0.0 })
        .collect();
    let maybe: Vec<usize> = (0..len)
        .filter(|&s| !model.absorbing[s] && may_fail[s] && !never[s])
        .collect();
    if maybe.is_empty() {
        return Ok(x);
    }

    const MAX_SWEEPS: usize = 1_000_000;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        for &s in &maybe {
            x[s] = model.transitions[s].iter().map(|&(t, p)| p * x[t as usize]).sum();
        }
        residual = maybe
            .iter()
            .map(|&s| {
                let lhs: f64 = model.transitions[s].iter().map(|&(t, p)| p * x[t as usize]).sum();
                (lhs - x[s]).abs()
            })
            .fold(0.0, f64::max);
        if residual < 1e-12 {
            return Ok(x);
        }
    }
    Err(ElectionError::NonConvergence {
        iterations: MAX_SWEEPS,
        residual,
    })
}

fn predecessors(model: &DtmcModel) -> Vec<Vec<u32>> {
    let mut preds = vec![Vec::new(); model.states.len()];
    for (s, row) in model.transitions.iter().enumerate() {
        for &(t, p) in row {
            if p > 0.0 && t as usize != s {
                preds[t as usize].push(s as u32);
            }
        }
    }
    preds
}

/// States that can reach `seed` through states satisfying `through`.
fn backward_closure(preds: &[Vec<u32>], mut marked: Vec<bool>, through: impl Fn(usize) -> bool) -> Vec<bool> {
    let mut stack: Vec<usize> = (0..marked.len()).filter(|&s| marked[s]).collect();
    while let Some(t) = stack.pop() {
        for &s in &preds[t] {
            let s = s as usize;
            if !marked[s] && through(s) {
                marked[s] = true;
                stack.push(s);
            }
        }
    }
    marked
}

/// Expected number of synchronous steps until a leader is elected.
///
/// Gauss-Seidel on `E = 1 + Q E` until every residual is below `1e-10`
/// relative to `max(1, E)`.
pub fn expected_rounds(model: &DtmcModel) -> Result<f64> {
    Ok(expected_rounds_all(model)?[0])
}

pub fn expected_rounds_all(model: &DtmcModel) -> Result<Vec<f64>> {
    let reach = absorption_probabilities(model)?;
    if let Some(s) = reach.iter().position(|&p| p < 1.0 - 1e-9) {
        return Err(ElectionError::InvalidModel(format!(
            "state {s} is absorbed with probability {} < 1; expected time is infinite",
            reach[s]
        )));
    }
    let len = model.states.len();
    let transient: Vec<usize> = (0..len).filter(|&s| !model.absorbing[s]).collect();
    let mut e = vec![0.0; len];

    const MAX_SWEEPS: usize = 5_000_000;
    let mut residual = f64::INFINITY;
    for sweep in 0..MAX_SWEEPS {
        for &s in &transient {
            let mut self_p = 0.0;
            let mut acc = 1.0;
            for &(t, p) in &model.transitions[s] {
                if t as usize == s {
                    self_p += p;
                } else {
                    acc += p * e[t as usize];
                }
            }
            e[s] = acc / (1.0 - self_p);
        }
        if sweep % 16 != 15 {
            continue;
        }
        residual = transient
            .iter()
            .map(|&s| {
                let rhs: f64 = 1.0 + model.transitions[s].iter().map(|&(t, p)| p * e[t as usize]).sum::<f64>();
                (rhs - e[s]).abs() / e[s].max(1.0)
            })
            .fold(0.0, f64::max);
        if residual < 1e-10 {
            return Ok(e);
        }
    }
    Err(ElectionError::NonConvergence {
        iterations: MAX_SWEEPS,
        residual,
    })
}

/// Outcome of evaluating every monitor check on every reachable state.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub n: usize,
    pub a0: f64,
    pub states_checked: usize,
    /// `(state index, rendered state, finding)`.
    pub violations: Vec<(usize, String, Finding)>,
}

impl InvariantReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn exhaustive_invariant_check(model: &DtmcModel) -> Result<InvariantReport> {
    if !model.options.track_metadata {
        return Err(ElectionError::InvalidModel(
            "exhaustive checks need a model built with track_metadata".into(),
        ));
    }
    let mut violations = Vec::new();
    for (i, s) in model.states.iter().enumerate() {
        let ring = s.to_ring();
        for f in check_all(&ring, model.n).into_iter().chain(check_segments(&ring)) {
            violations.push((i, s.to_string(), f));
        }
    }
    for tf in &model.transition_findings {
        violations.push((tf.from, model.states[tf.from].to_string(), tf.finding.clone()));
    }
    Ok(InvariantReport {
        n: model.n,
        a0: model.a0,
        states_checked: model.states.len(),
        violations,
    })
}
