//! Reduced path-vector semantics: a shared-memory protocol whose only state
//! is each node's current best route. Nodes poll their peers for the
//! advertisement they would send instead of exchanging messages.

use crate::netmodel::{rank_compare, NodeId, ProtocolInstance, Rank, RouteEntry};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

/// A node's selection. `Routes` holds more than one entry only for
/// cost-tied OSPF next hops in multipath mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "BestRepr", into = "BestRepr")]
pub enum Best {
    Bottom,
    Epsilon,
    Routes(Arc<Vec<RouteEntry>>),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BestRepr {
    Bottom,
    Epsilon,
    Routes(Vec<RouteEntry>),
}

impl From<BestRepr> for Best {
    fn from(b: BestRepr) -> Self {
        match b {
            BestRepr::Bottom => Best::Bottom,
            BestRepr::Epsilon => Best::Epsilon,
            BestRepr::Routes(rs) => Best::Routes(Arc::new(rs)),
        }
    }
}

impl From<Best> for BestRepr {
    fn from(b: Best) -> Self {
        match b {
            Best::Bottom => BestRepr::Bottom,
            Best::Epsilon => BestRepr::Epsilon,
            Best::Routes(rs) => BestRepr::Routes(rs.as_ref().clone()),
        }
    }
}

impl Best {
    pub fn is_bottom(&self) -> bool {
        matches!(self, Best::Bottom)
    }

    /// Decided in the sense used by the pruning rules: holds anything but Bottom.
    pub fn is_selected(&self) -> bool {
        !self.is_bottom()
    }

    pub fn routes(&self) -> &[RouteEntry] {
        match self {
            Best::Routes(r) => r,
            _ => &[],
        }
    }

    /// The entry used for ranking and for re-advertisement.
    pub fn primary(&self) -> Option<&RouteEntry> {
        self.routes().first()
    }

    pub fn next_hops(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.routes().iter().filter_map(|r| r.head())
    }

    pub fn single(entry: RouteEntry) -> Best {
        Best::Routes(Arc::new(vec![entry]))
    }

    /// Holds a route whose path is exactly `path` (the empty path for Epsilon).
    fn has_path(&self, path: &[NodeId]) -> bool {
        match self {
            Best::Bottom => false,
            Best::Epsilon => path.is_empty(),
            Best::Routes(rs) => rs.iter().any(|r| r.path == path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProtocolState {
    pub best: Vec<Best>,
}

impl ProtocolState {
    /// Origins hold Epsilon, everyone else Bottom.
    pub fn initial(inst: &ProtocolInstance) -> Self {
        let best = (0..inst.node_count() as u32)
            .map(|i| if inst.is_origin(NodeId(i)) { Best::Epsilon } else { Best::Bottom })
            .collect();
        ProtocolState { best }
    }

    pub fn get(&self, n: NodeId) -> &Best {
        &self.best[n.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EnableReason {
    InvalidPath,
    BetterUpdateAvailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "peer", rename_all = "kebab-case")]
pub enum Choice {
    /// Adopt the advertisement from this peer.
    Peer(NodeId),
    /// Adopt every tied advertisement (multipath only).
    AllTied,
    /// Invalid node with nothing on offer falls back to Bottom.
    TakeBottom,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RpvpError {
    #[error("node {0} is not enabled")]
    NotEnabled(NodeId),
    #[error("illegal choice {1:?} at node {0}")]
    IllegalChoice(NodeId, Choice),
}

/// What a node could do next in a given state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeStatus {
    pub invalid: bool,
    /// Rank-maximal updates that beat the node's (cleared if invalid) best,
    /// sorted by peer. All entries are mutually EqualRank.
    pub updates: Vec<(NodeId, RouteEntry)>,
    /// Multipath: the updates tie the current best and extend it.
    pub extends: bool,
}

impl NodeStatus {
    pub fn enabled(&self) -> bool {
        self.invalid || !self.updates.is_empty()
    }

    pub fn reason(&self) -> Option<EnableReason> {
        if self.invalid {
            Some(EnableReason::InvalidPath)
        } else if !self.updates.is_empty() {
            Some(EnableReason::BetterUpdateAvailable)
        } else {
            None
        }
    }

    /// The choices a scheduler may make for this node.
    pub fn choices(&self, multipath: bool) -> Vec<Choice> {
        if self.updates.is_empty() {
            if self.invalid {
                vec![Choice::TakeBottom]
            } else {
                vec![]
            }
        } else if multipath {
            vec![Choice::AllTied]
        } else {
            self.updates.iter().map(|(p, _)| Choice::Peer(*p)).collect()
        }
    }
}

/// best(n) is non-Bottom and its next hop no longer holds the suffix, or the
/// session to that next hop is down.
pub fn is_invalid(inst: &ProtocolInstance, state: &ProtocolState, n: NodeId) -> bool {
    state.get(n).routes().iter().any(|r| match r.head() {
        None => false,
        Some(h) => !inst.session_live(n, h) || !state.get(h).has_path(r.rest()),
    })
}

/// The route `peer` would currently advertise to `n` after both filters.
pub fn offer(inst: &ProtocolInstance, state: &ProtocolState, n: NodeId, peer: NodeId) -> Option<RouteEntry> {
    let sender_best = match state.get(peer) {
        Best::Bottom => return None,
        Best::Epsilon => inst.origin_entry(),
        Best::Routes(rs) => rs[0].clone(),
    };
    inst.offer(n, peer, &sender_best)
}

/// The update from `peer` if it beats the current best of `n`.
pub fn can_update(
    inst: &ProtocolInstance,
    state: &ProtocolState,
    n: NodeId,
    peer: NodeId,
) -> Option<RouteEntry> {
    let cand = offer(inst, state, n, peer)?;
    (rank_compare(Some(&cand), state.get(n).primary()) == Rank::Better).then_some(cand)
}

/// Full status of `n`: validity plus its best set of updates.
pub fn node_status(inst: &ProtocolInstance, state: &ProtocolState, n: NodeId) -> NodeStatus {
    if inst.is_origin(n) {
        return NodeStatus { invalid: false, updates: vec![], extends: false };
    }
    let invalid = is_invalid(inst, state, n);
    let current = if invalid { None } else { state.get(n).primary() };
    let current_heads: Vec<NodeId> = if invalid { vec![] } else { state.get(n).next_hops().collect() };
    let mut updates: Vec<(NodeId, RouteEntry)> = Vec::new();
    let mut extends = false;
    for s in inst.peers(n) {
        let Some(cand) = offer(inst, state, n, s.peer) else { continue };
        let vs_current = rank_compare(Some(&cand), current);
        let usable = match vs_current {
            Rank::Better => true,
            Rank::EqualRank => inst.multipath && current.is_some() && !current_heads.contains(&s.peer),
            Rank::Worse => false,
        };
        if !usable {
            continue;
        }
        match updates.first().map(|(_, u)| rank_compare(Some(&cand), Some(u))) {
            None | Some(Rank::EqualRank) => updates.push((s.peer, cand)),
            Some(Rank::Better) => {
                updates.clear();
                updates.push((s.peer, cand));
            }
            Some(Rank::Worse) => {}
        }
    }
    if let Some((_, u)) = updates.first() {
        extends = rank_compare(Some(u), current) == Rank::EqualRank;
    }
    NodeStatus { invalid, updates, extends }
}

/// Rank-maximal updates available to `n`, sorted by peer.
pub fn best_update_peers(
    inst: &ProtocolInstance,
    state: &ProtocolState,
    n: NodeId,
) -> Vec<(NodeId, RouteEntry)> {
    node_status(inst, state, n).updates
}

/// Status of every node; index by node id.
pub fn analyze(inst: &ProtocolInstance, state: &ProtocolState) -> Vec<NodeStatus> {
    (0..inst.node_count() as u32).map(|i| node_status(inst, state, NodeId(i))).collect()
}

/// Enabled nodes with the reason, ascending by node id.
pub fn enabled_nodes(inst: &ProtocolInstance, state: &ProtocolState) -> Vec<(NodeId, EnableReason)> {
    analyze(inst, state)
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.reason().map(|r| (NodeId(i as u32), r)))
        .collect()
}

pub fn is_converged(inst: &ProtocolInstance, state: &ProtocolState) -> bool {
    (0..inst.node_count() as u32).all(|i| !node_status(inst, state, NodeId(i)).enabled())
}

/// One RPVP iteration at `n`: clear an invalid best, then adopt the chosen
/// update. Only `n`'s entry changes.
pub fn apply_step(
    inst: &ProtocolInstance,
    state: &ProtocolState,
    n: NodeId,
    choice: Choice,
) -> Result<ProtocolState, RpvpError> {
    let status = node_status(inst, state, n);
    apply_with_status(inst, state, n, &status, choice)
}

/// [`apply_step`] with a precomputed status for `n`.
pub fn apply_with_status(
    inst: &ProtocolInstance,
    state: &ProtocolState,
    n: NodeId,
    status: &NodeStatus,
    choice: Choice,
) -> Result<ProtocolState, RpvpError> {
    if !status.enabled() {
        return Err(RpvpError::NotEnabled(n));
    }
    let new_best = match choice {
        Choice::TakeBottom if status.updates.is_empty() => Best::Bottom,
        Choice::Peer(p) if !inst.multipath => match status.updates.iter().find(|(q, _)| *q == p) {
            Some((_, e)) => Best::single(e.clone()),
            None => return Err(RpvpError::IllegalChoice(n, choice)),
        },
        Choice::AllTied if inst.multipath && !status.updates.is_empty() => {
            let mut routes: Vec<RouteEntry> =
                if status.extends { state.get(n).routes().to_vec() } else { Vec::new() };
            routes.extend(status.updates.iter().map(|(_, e)| e.clone()));
            routes.sort_by_key(|r| r.head());
            Best::Routes(Arc::new(routes))
        }
        _ => return Err(RpvpError::IllegalChoice(n, choice)),
    };
    let mut next = state.clone();
    next.best[n.index()] = new_best;
    Ok(next)
}
