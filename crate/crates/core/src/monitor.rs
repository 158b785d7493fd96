//! Executable forms of the correctness and complexity invariants.
//!
//! Every check reads a [`RingConfiguration`] and never mutates it. The
//! simulator calls [`MonitorState::observe`] between atomic events and
//! [`MonitorState::observe_delivery`] around deliveries to active nodes.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::protocol::{Node, NodeState};
use crate::sim::RingConfiguration;

/// Identifier of one executable invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CheckId {
    /// `dead - 1` immediate predecessors are passive.
    L1,
    /// A leader implies everyone else passive and no messages.
    L2,
    /// Messages in flight equal active nodes.
    L3,
    /// Some node is not passive.
    L4,
    /// Messages on a segment equal the wake-count difference.
    L5,
    /// Segment length matches `dead - 1` absent knockout messages.
    L6,
    /// Dead counters of non-passive nodes sum to `n` absent knockout messages.
    Cor,
    /// Strict maximum wake count at delivery implies election.
    LIdle,
    /// Hop counters stay within `1..=n`.
    HopCap,
}

impl CheckId {
    pub const ALL: [CheckId; 9] = [
        CheckId::L1,
        CheckId::L2,
        CheckId::L3,
        CheckId::L4,
        CheckId::L5,
        CheckId::L6,
        CheckId::Cor,
        CheckId::LIdle,
        CheckId::HopCap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::L1 => "L1",
            CheckId::L2 => "L2",
            CheckId::L3 => "L3",
            CheckId::L4 => "L4",
            CheckId::L5 => "L5",
            CheckId::L6 => "L6",
            CheckId::Cor => "COR",
            CheckId::LIdle => "LIDLE",
            CheckId::HopCap => "HOPCAP",
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A failed check without run context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub check: CheckId,
    pub detail: String,
}

impl Finding {
    fn new(check: CheckId, detail: impl Into<String>) -> Self {
        Finding {
            check,
            detail: detail.into(),
        }
    }
}

/// A failed check recorded during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub event_seq: u64,
    pub check: CheckId,
    pub detail: String,
    /// JSON dump of the ring at the time of the violation.
    pub snapshot: String,
}

/// L1, L2, L3, L4 and HOPCAP for one configuration.
pub fn check_all(ring: &RingConfiguration, n: usize) -> Vec<Finding> {
    let mut out = Vec::new();
    check_all_into(ring, n, &mut out);
    out
}

fn check_all_into(ring: &RingConfiguration, n: usize, out: &mut Vec<Finding>) {
    let nodes = &ring.nodes;

    let passive_run = passive_predecessors(nodes);
    for (node, &run) in nodes.iter().zip(&passive_run) {
        if node.dead < 1 || (node.dead - 1) as usize > run {
            out.push(Finding::new(
                CheckId::L1,
                format!("node {} has dead={} but only {} passive predecessors", node.id, node.dead, run),
            ));
        }
    }

    let leaders: Vec<usize> = nodes.iter().filter(|x| x.state == NodeState::Leader).map(|x| x.id).collect();
    if !leaders.is_empty() {
        let others_passive = nodes
            .iter()
            .all(|x| x.state == NodeState::Passive || leaders.first() == Some(&x.id));
        if leaders.len() > 1 || !others_passive || !ring.in_flight.is_empty() {
            out.push(Finding::new(
                CheckId::L2,
                format!(
                    "leaders {:?} with non-passive others={} and {} messages in flight",
                    leaders,
                    !others_passive,
                    ring.in_flight.len()
                ),
            ));
        }
    }

    let active = nodes.iter().filter(|x| x.state == NodeState::Active).count();
    if active != ring.in_flight.len() {
        out.push(Finding::new(
            CheckId::L3,
            format!("{} active nodes but {} messages in flight", active, ring.in_flight.len()),
        ));
    }

    if nodes.iter().all(|x| x.state.is_passive()) {
        out.push(Finding::new(CheckId::L4, "every node is passive"));
    }

    for m in ring.in_flight.values() {
        if m.message.hop < 1 || m.message.hop as usize > n {
            out.push(Finding::new(
                CheckId::HopCap,
                format!("message {} on link {} has hop {}", m.message.msg_id, m.link, m.message.hop),
            ));
        }
    }
}

/// Number of consecutive passive nodes immediately preceding each node.
fn passive_predecessors(nodes: &[Node]) -> Vec<usize> {
    let n = nodes.len();
    let Some(start) = nodes.iter().position(|x| !x.state.is_passive()) else {
        return vec![n.saturating_sub(1); n];
    };
    let mut out = vec![0; n];
    let mut run = 0;
    for k in 1..=n {
        let i = (start + k) % n;
        out[i] = run;
        if nodes[i].state.is_passive() {
            run += 1;
        } else {
            run = 0;
        }
    }
    out
}

/// L5, L6 and COR for one configuration. Linear in `n` plus the number of
/// messages.
pub fn check_segments(ring: &RingConfiguration) -> Vec<Finding> {
    let mut out = Vec::new();
    check_segments_into(ring, &mut out);
    out
}

fn check_segments_into(ring: &RingConfiguration, out: &mut Vec<Finding>) {
    let nodes = &ring.nodes;
    let n = nodes.len();
    let mut on_link = vec![0i64; n];
    let mut knockout_on_link = vec![0usize; n];
    for m in ring.in_flight.values() {
        on_link[m.link] += 1;
        if m.message.knockout {
            knockout_on_link[m.link] += 1;
        }
    }

    let non_passive: Vec<usize> = (0..n).filter(|&i| !nodes[i].state.is_passive()).collect();
    if non_passive.is_empty() {
        return;
    }

    for (k, &a) in non_passive.iter().enumerate() {
        let b = non_passive[(k + 1) % non_passive.len()];
        let links = if a == b { n } else { (b + n - a) % n };
        let (mut messages, mut knockouts) = (0i64, 0usize);
        for j in 0..links {
            let link = (a + j) % n;
            messages += on_link[link];
            knockouts += knockout_on_link[link];
        }
        let (na, nb) = (&nodes[a], &nodes[b]);

        let expected = na.wake_count as i64 - nb.wake_count as i64 + i64::from(nb.state == NodeState::Active);
        if messages != expected {
            out.push(Finding::new(
                CheckId::L5,
                format!(
                    "segment {a}->{b}: {messages} messages, expected {expected} (wake {} - {} + active {})",
                    na.wake_count,
                    nb.wake_count,
                    nb.state == NodeState::Active
                ),
            ));
        }

        if knockouts == 0 {
            let between = links - 1;
            if between as i64 != nb.dead as i64 - 1 {
                out.push(Finding::new(
                    CheckId::L6,
                    format!("segment {a}->{b}: {between} nodes strictly between but dead_{b} = {}", nb.dead),
                ));
            }
        }
    }

    if ring.in_flight.values().all(|m| !m.message.knockout) {
        let total: u64 = non_passive.iter().map(|&i| nodes[i].dead as u64).sum();
        if total != n as u64 {
            out.push(Finding::new(
                CheckId::Cor,
                format!("no knockout messages but non-passive dead counters sum to {total}, not {n}"),
            ));
        }
    }
}

/// Strict-maximum check for a delivery to an active node: if the target's
/// wake count exceeds every other node's, the delivery must elect it.
pub fn check_max_wake_elected(target_before: &Node, target_after: &Node, nodes: &[Node]) -> Option<Finding> {
    if target_before.state != NodeState::Active {
        return None;
    }
    let strict_max = nodes
        .iter()
        .filter(|x| x.id != target_before.id)
        .all(|x| x.wake_count < target_before.wake_count);
    if strict_max && target_after.state != NodeState::Leader {
        Some(Finding::new(
            CheckId::LIdle,
            format!(
                "node {} has strictly maximal wake count {} but became {}",
                target_before.id,
                target_before.wake_count,
                target_after.state.as_str()
            ),
        ))
    } else {
        None
    }
}

/// Enabled checks plus the violations seen so far.
#[derive(Debug, Clone)]
pub struct MonitorState {
    enabled: BTreeSet<CheckId>,
    violations: Vec<Violation>,
    n: usize,
    scratch: Vec<Finding>,
}

impl MonitorState {
    pub fn new(n: usize, enabled: impl IntoIterator<Item = CheckId>) -> Self {
        MonitorState {
            enabled: enabled.into_iter().collect(),
            violations: Vec::new(),
            n,
            scratch: Vec::new(),
        }
    }

    pub fn all(n: usize) -> Self {
        Self::new(n, CheckId::ALL)
    }

    pub fn enabled(&self) -> &BTreeSet<CheckId> {
        &self.enabled
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn into_violations(self) -> Vec<Violation> {
        self.violations
    }

    /// Runs every enabled configuration check after event `seq`.
    pub fn observe(&mut self, seq: u64, ring: &RingConfiguration) {
        self.scratch.clear();
        let wants = |c: &[CheckId]| c.iter().any(|x| self.enabled.contains(x));
        let mut findings = std::mem::take(&mut self.scratch);
        if wants(&[CheckId::L1, CheckId::L2, CheckId::L3, CheckId::L4, CheckId::HopCap]) {
            check_all_into(ring, self.n, &mut findings);
        }
        if wants(&[CheckId::L5, CheckId::L6, CheckId::Cor]) {
            check_segments_into(ring, &mut findings);
        }
        self.record(seq, ring, &findings);
        findings.clear();
        self.scratch = findings;
    }

    /// Invariant check for a delivery to `target`. `ring` is the post-event
    /// configuration.
    pub fn observe_delivery(&mut self, seq: u64, target_before: &Node, ring: &RingConfiguration) {
        if !self.enabled.contains(&CheckId::LIdle) {
            return;
        }
        let after = &ring.nodes[target_before.id];
        if let Some(f) = check_max_wake_elected(target_before, after, &ring.nodes) {
            self.record(seq, ring, &[f]);
        }
    }

    fn record(&mut self, seq: u64, ring: &RingConfiguration, findings: &[Finding]) {
        let mut snapshot = None;
        for f in findings.iter().filter(|f| self.enabled.contains(&f.check)) {
            let snap = snapshot.get_or_insert_with(|| serde_json::to_string(ring).unwrap_or_default());
            self.violations.push(Violation {
                event_seq: seq,
                check: f.check,
                detail: f.detail.clone(),
                snapshot: snap.clone(),
            });
        }
    }
}
