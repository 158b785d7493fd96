//! Per-node state machine of the election protocol.
//!
//! Everything here is a pure function of its inputs. The wake-up gamble is
//! drawn by the caller and passed in, so the same code drives the
//! discrete-event simulator, the Markov-chain builder and property tests.

use serde::{Deserialize, Serialize};

use crate::error::ElectionError;

/// Protocol role of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeState {
    Idle,
    Active,
    Passive,
    Leader,
}

impl NodeState {
    pub fn is_passive(self) -> bool {
        self == NodeState::Passive
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeState::Idle => "idle",
            NodeState::Active => "active",
            NodeState::Passive => "passive",
            NodeState::Leader => "leader",
        }
    }
}

/// A ring member. `id` is the ring position and exists for instrumentation
/// only; the protocol never reads it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub state: NodeState,
    /// Highest hop count ever received, initially 1.
    pub dead: u32,
    /// Number of Idle -> Active transitions performed so far.
    pub wake_count: u32,
}

impl Node {
    pub fn new(id: usize) -> Self {
        Node {
            id,
            state: NodeState::Idle,
            dead: 1,
            wake_count: 0,
        }
    }
}

/// Protocol message `<hop>` plus analysis-only metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub hop: u32,
    /// Set once the message (under this `msg_id`) has turned an idle node
    /// passive. Invisible to the protocol.
    pub knockout: bool,
    /// Preserved across forwards. Invisible to the protocol.
    pub msg_id: u64,
}

impl Message {
    pub fn fresh(msg_id: u64) -> Self {
        Message {
            hop: 1,
            knockout: false,
            msg_id,
        }
    }
}

/// What a node does in response to a single event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeAction {
    Send(Message),
    Purge,
    BecomeLeader,
    None,
}

/// Hop count a forwarding node writes into the relayed message.
///
/// `DeadPlusOne` is the protocol. `HopPlusOne` is the naive rule kept only as
/// a mutant for checking that the invariant suite notices the difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForwardRule {
    #[default]
    DeadPlusOne,
    HopPlusOne,
}

/// `1 - (1 - a0)^dead`: probability that an idle node wakes on a tick.
pub fn wake_probability(dead: u32, a0: f64) -> Result<f64, ElectionError> {
    if dead < 1 {
        return Err(ElectionError::InvalidParameter(format!(
            "dead counter must be at least 1, got {dead}"
        )));
    }
    validate_activation(a0)?;
    Ok(wake_probability_unchecked(dead, a0))
}

/// Same as [`wake_probability`] without argument validation. `ln_1p` keeps
/// tiny activation parameters accurate.
pub(crate) fn wake_probability_unchecked(dead: u32, a0: f64) -> f64 {
    -f64::exp_m1(dead as f64 * f64::ln_1p(-a0))
}

pub(crate) fn validate_activation(a0: f64) -> Result<(), ElectionError> {
    if a0.is_finite() && a0 > 0.0 && a0 < 1.0 {
        Ok(())
    } else {
        Err(ElectionError::InvalidParameter(format!(
            "activation parameter must lie in (0, 1), got {a0}"
        )))
    }
}

/// Clock tick at `node`. Only idle nodes gamble; `woke` is the outcome of
/// that gamble, drawn by the caller with [`wake_probability`].
///
/// The emitted message gets `msg_id = 0`; the caller assigns identities.
pub fn on_tick(node: Node, woke: bool) -> (Node, NodeAction) {
    if node.state != NodeState::Idle || !woke {
        return (node, NodeAction::None);
    }
    let next = Node {
        state: NodeState::Active,
        wake_count: node.wake_count + 1,
        ..node
    };
    (next, NodeAction::Send(Message::fresh(0)))
}

/// Delivery of `msg` to `node` on a ring of size `n`.
pub fn on_receive(node: Node, msg: Message, n: u32) -> Result<(Node, NodeAction), ElectionError> {
    on_receive_with(ForwardRule::DeadPlusOne, node, msg, n)
}

/// [`on_receive`] with an explicit forwarding rule.
pub fn on_receive_with(
    rule: ForwardRule,
    node: Node,
    msg: Message,
    n: u32,
) -> Result<(Node, NodeAction), ElectionError> {
    if msg.hop < 1 {
        return Err(ElectionError::ProtocolViolation(format!(
            "node {} received hop {} (< 1)",
            node.id, msg.hop
        )));
    }
    if node.state == NodeState::Leader {
        return Err(ElectionError::ProtocolViolation(format!(
            "leader {} received a message with hop {}",
            node.id, msg.hop
        )));
    }

    let dead = node.dead.max(msg.hop);
    let forwarded_hop = match rule {
        ForwardRule::DeadPlusOne => dead + 1,
        ForwardRule::HopPlusOne => msg.hop + 1,
    };
    let mut next = Node { dead, ..node };

    let action = match node.state {
        NodeState::Idle => {
            next.state = NodeState::Passive;
            NodeAction::Send(Message {
                hop: forwarded_hop,
                knockout: true,
                msg_id: msg.msg_id,
            })
        }
        NodeState::Passive => NodeAction::Send(Message {
            hop: forwarded_hop,
            ..msg
        }),
        NodeState::Active if msg.hop == n => {
            next.state = NodeState::Leader;
            NodeAction::BecomeLeader
        }
        NodeState::Active => {
            next.state = NodeState::Idle;
            NodeAction::Purge
        }
        NodeState::Leader => unreachable!(),
    };
    Ok((next, action))
}
