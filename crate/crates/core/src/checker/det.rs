//! Nodes whose next step is the same in every converged extension of the
//! current state.

use crate::netmodel::{
    Attrs, NodeId, Protocol, ProtocolInstance, RouteEntry, SessionKind, DEFAULT_LOCAL_PREF,
};
use crate::rpvp::{NodeStatus, ProtocolState};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

type BgpKey = (u32, u32, u32, u32);

fn bgp_key(e: &RouteEntry) -> Option<BgpKey> {
    match &e.attrs {
        Attrs::Bgp { local_pref, as_path_len, ibgp, igp_cost, .. } => {
            Some((u32::MAX - *local_pref, *as_path_len, *ibgp as u32, *igp_cost))
        }
        Attrs::Ospf { .. } => None,
    }
}

/// Per-search facts computed once from the instance.
#[derive(Debug, Clone)]
pub enum DetOracle {
    /// Shortest distance from any origin; None when unreachable.
    Ospf {
        dist: Vec<Option<u32>>,
    },
    Bgp {
        min_as: Vec<Option<u32>>,
        max_lp: u32,
    },
    Off,
}

impl DetOracle {
    pub fn new(inst: &ProtocolInstance) -> Self {
        match inst.protocol {
            Protocol::Ospf => {
                let zero = (0..inst.node_count() as u32).any(|i| inst.peers(NodeId(i)).any(|s| s.cost == 0));
                if zero {
                    return DetOracle::Off;
                }
                DetOracle::Ospf { dist: ospf_distances(inst) }
            }
            Protocol::Bgp => DetOracle::Bgp { min_as: min_as_changes(inst), max_lp: max_local_pref(inst) },
            _ => DetOracle::Off,
        }
    }

    /// Lowest deterministic node among `candidates` (ascending). BGP
    /// detection assumes selected nodes never change again, so it is only
    /// offered when `consistent` holds.
    pub fn find(
        &self,
        inst: &ProtocolInstance,
        state: &ProtocolState,
        status: &[NodeStatus],
        candidates: &[NodeId],
        consistent: bool,
    ) -> Option<NodeId> {
        match self {
            DetOracle::Ospf { dist } => {
                // every node closer than the first unfinished one is done
                let frontier = (0..inst.node_count())
                    .filter(|&i| {
                        let optimal = state.best[i].primary().and_then(|e| e.ospf_cost()) == dist[i]
                            || (inst.is_origin(NodeId(i as u32)) && dist[i] == Some(0));
                        !optimal || status[i].enabled()
                    })
                    .filter_map(|i| dist[i])
                    .min()?;
                let det = candidates.iter().copied().filter(|n| {
                    let s = &status[n.index()];
                    !s.invalid
                        && dist[n.index()].map_or(false, |d| d <= frontier)
                        && s.updates.first().and_then(|(_, e)| e.ospf_cost()) == dist[n.index()]
                });
                non_branching(inst, status, det)
            }
            DetOracle::Bgp { min_as, max_lp } if consistent => {
                let det = candidates
                    .iter()
                    .copied()
                    .filter(|n| bgp_deterministic(inst, state, &status[n.index()], *n, min_as, *max_lp));
                non_branching(inst, status, det)
            }
            _ => None,
        }
    }
}

/// A deterministic node may still split on tied routes. Scheduling it first
/// then branches early, so such nodes are left to the ordinary expansion.
fn non_branching(
    inst: &ProtocolInstance,
    status: &[NodeStatus],
    mut det: impl Iterator<Item = NodeId>,
) -> Option<NodeId> {
    det.find(|n| status[n.index()].choices(inst.multipath).len() <= 1)
}

fn bgp_deterministic(
    inst: &ProtocolInstance,
    state: &ProtocolState,
    st: &NodeStatus,
    n: NodeId,
    min_as: &[Option<u32>],
    max_lp: u32,
) -> bool {
    if st.invalid || state.get(n).is_selected() {
        return false;
    }
    let Some(best) = st.updates.first().and_then(|(_, e)| bgp_key(e)) else {
        return false;
    };
    inst.peers(n).all(|s| {
        let p = s.peer;
        if state.get(p).is_selected() {
            // its offer is final
            return true;
        }
        match offer_bound(inst, n, p, min_as, max_lp) {
            Some(bound) => bound > best,
            None => true,
        }
    })
}

/// Best key anything `p` could ever offer `n`; None when it never can.
fn offer_bound(
    inst: &ProtocolInstance,
    n: NodeId,
    p: NodeId,
    min_as: &[Option<u32>],
    max_lp: u32,
) -> Option<BgpKey> {
    let out = inst.session(p, n)?;
    let inn = inst.session(n, p)?;
    let ibgp = inn.kind == Some(SessionKind::Ibgp);
    let sent = if out.kind == Some(SessionKind::Ebgp) { DEFAULT_LOCAL_PREF } else { max_lp };
    let sent = match &out.export {
        Some(m) => m.local_pref_bound(sent)?,
        None => sent,
    };
    let lp = match &inn.import {
        Some(m) => m.local_pref_bound(sent)?,
        None => sent,
    };
    let as_len = min_as[p.index()]? + (inst.asn(n) != inst.asn(p)) as u32;
    Some((u32::MAX - lp, as_len, ibgp as u32, if ibgp { inn.cost } else { 0 }))
}

fn ospf_distances(inst: &ProtocolInstance) -> Vec<Option<u32>> {
    let n = inst.node_count();
    let mut dist: Vec<Option<u32>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    for o in inst.origins() {
        dist[o.index()] = Some(0);
        heap.push(Reverse((0u32, *o)));
    }
    while let Some(Reverse((d, p))) = heap.pop() {
        if dist[p.index()] != Some(d) {
            continue;
        }
        for m in 0..n as u32 {
            let m = NodeId(m);
            // m learns from p at m's cost for the session towards p
            if let Some(s) = inst.session(m, p).filter(|_| inst.session_live(m, p)) {
                let nd = d + s.cost;
                if dist[m.index()].map_or(true, |x| nd < x) && !inst.is_origin(m) {
                    dist[m.index()] = Some(nd);
                    heap.push(Reverse((nd, m)));
                }
            }
        }
    }
    dist
}

/// Fewest AS changes on any live session path from the node to an origin.
fn min_as_changes(inst: &ProtocolInstance) -> Vec<Option<u32>> {
    let n = inst.node_count();
    let mut d: Vec<Option<u32>> = vec![None; n];
    let mut q = VecDeque::new();
    for o in inst.origins() {
        d[o.index()] = Some(0);
        q.push_back(*o);
    }
    while let Some(p) = q.pop_front() {
        let dp = d[p.index()].unwrap();
        for s in inst.peers(p) {
            let m = s.peer;
            let w = (inst.asn(m) != inst.asn(p)) as u32;
            if d[m.index()].map_or(true, |x| dp + w < x) {
                d[m.index()] = Some(dp + w);
                if w == 0 {
                    q.push_front(m);
                } else {
                    q.push_back(m);
                }
            }
        }
    }
    d
}

fn max_local_pref(inst: &ProtocolInstance) -> u32 {
    let mut lp = DEFAULT_LOCAL_PREF;
    for i in 0..inst.node_count() as u32 {
        for s in inst.all_sessions(NodeId(i)) {
            for m in s.import.iter().chain(s.export.iter()) {
                if let Some(b) = m.local_pref_bound(0) {
                    lp = lp.max(b);
                }
            }
        }
    }
    lp
}
