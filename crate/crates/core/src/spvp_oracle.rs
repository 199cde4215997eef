//! Brute-force simulator of the message-passing path-vector protocol: FIFO
//! buffers per directed session, a rib-in per node, and every interleaving of
//! message deliveries. Used as ground truth for small instances.

use crate::netmodel::{rank_compare, LinkId, NodeId, ProtocolInstance, Rank, RouteEntry};
use crate::rpvp::Best;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

/// An advertisement in flight; None is a withdrawal.
pub type Message = Option<RouteEntry>;

/// Interned message. Slot 0 is the withdrawal.
type Id = u32;
const WITHDRAWN: Id = 0;
/// Only ever stored as a best, never sent.
const EPSILON: Id = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpvpState {
    best: Vec<Id>,
    /// Last imported advertisement per peer; WITHDRAWN covers Bottom and rejected.
    rib_in: Vec<BTreeMap<NodeId, Id>>,
    /// Non-empty buffers keyed by (sender, receiver).
    buffers: BTreeMap<(NodeId, NodeId), VecDeque<Id>>,
    /// The pending failure has been applied (always true without one).
    failed: bool,
}

impl SpvpState {
    pub fn is_quiet(&self) -> bool {
        self.buffers.is_empty()
    }

    pub fn pending(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.buffers.keys().copied()
    }

    pub fn buffered_messages(&self) -> usize {
        self.buffers.values().map(|q| q.len()).sum()
    }
}

/// Message interning plus the protocol step functions.
pub struct Simulator<'a> {
    inst: &'a ProtocolInstance,
    entries: Vec<Message>,
    index: HashMap<Message, Id>,
}

impl<'a> Simulator<'a> {
    pub fn new(inst: &'a ProtocolInstance) -> Self {
        let mut index = HashMap::new();
        index.insert(None, WITHDRAWN);
        Simulator { inst, entries: vec![None], index }
    }

    fn intern(&mut self, m: Message) -> Id {
        if let Some(id) = self.index.get(&m) {
            return *id;
        }
        let id = self.entries.len() as Id;
        self.entries.push(m.clone());
        self.index.insert(m, id);
        id
    }

    fn entry(&self, id: Id) -> Option<&RouteEntry> {
        if id == EPSILON {
            None
        } else {
            self.entries[id as usize].as_ref()
        }
    }

    pub fn best_of(&self, s: &SpvpState) -> Vec<Best> {
        s.best
            .iter()
            .map(|&id| match id {
                EPSILON => Best::Epsilon,
                _ => match &self.entries[id as usize] {
                    Some(e) => Best::single(e.clone()),
                    None => Best::Bottom,
                },
            })
            .collect()
    }

    /// Origins hold Epsilon and advertise it to every live peer.
    pub fn initial(&mut self) -> SpvpState {
        let n = self.inst.node_count();
        let mut s = SpvpState {
            best: vec![WITHDRAWN; n],
            rib_in: vec![BTreeMap::new(); n],
            buffers: BTreeMap::new(),
            failed: true,
        };
        for &o in self.inst.origins() {
            s.best[o.index()] = EPSILON;
            self.announce(self.inst, &mut s, o);
        }
        s
    }

    /// Enqueues `n`'s current best, exported, to all live peers.
    fn announce(&mut self, inst: &ProtocolInstance, s: &mut SpvpState, n: NodeId) {
        let adv = match s.best[n.index()] {
            EPSILON => Some(inst.origin_entry()),
            id => self.entries[id as usize].clone(),
        };
        let peers: Vec<NodeId> = inst.peers(n).map(|p| p.peer).collect();
        for p in peers {
            let msg = adv.as_ref().and_then(|e| inst.apply_export(n, p, e));
            let id = self.intern(msg);
            s.buffers.entry((n, p)).or_default().push_back(id);
        }
    }

    /// Candidate bests for `n` after its rib-in changed: the current best when
    /// it is still valid and top-ranked, else every top-ranked rib-in entry.
    fn reselect(&self, inst: &ProtocolInstance, s: &SpvpState, n: NodeId) -> Vec<Id> {
        let cur = s.best[n.index()];
        if inst.is_origin(n) {
            return vec![cur];
        }
        let rib = &s.rib_in[n.index()];
        let cands: Vec<(Id, &RouteEntry)> = rib
            .iter()
            .filter(|(p, _)| inst.session_live(n, **p))
            .filter_map(|(_, id)| self.entry(*id).map(|e| (*id, e)))
            .collect();
        let Some(top) = cands.iter().map(|c| c.1).reduce(|a, b| {
            if rank_compare(Some(b), Some(a)) == Rank::Better {
                b
            } else {
                a
            }
        }) else {
            return vec![WITHDRAWN];
        };
        if let Some(c) = self.entry(cur) {
            let head = c.head().expect("non-origin best has a next hop");
            let valid = inst.session_live(n, head) && rib.get(&head) == Some(&cur);
            if valid && rank_compare(Some(c), Some(top)) == Rank::EqualRank {
                return vec![cur];
            }
        }
        cands
            .iter()
            .filter(|(_, e)| rank_compare(Some(e), Some(top)) == Rank::EqualRank)
            .map(|(id, _)| *id)
            .collect()
    }

    fn adopt(&mut self, inst: &ProtocolInstance, s: SpvpState, n: NodeId) -> Vec<SpvpState> {
        let choices = self.reselect(inst, &s, n);
        let mut out = Vec::with_capacity(choices.len());
        for b in choices {
            let mut next = s.clone();
            if next.best[n.index()] != b {
                next.best[n.index()] = b;
                self.announce(inst, &mut next, n);
            }
            out.push(next);
        }
        out
    }

    /// Delivers the head of the (sender, receiver) buffer. Several successors
    /// when the receiver has to pick among tied routes.
    pub fn step(&mut self, s: &SpvpState, sender: NodeId, receiver: NodeId) -> Vec<SpvpState> {
        self.step_in(self.inst, s, sender, receiver)
    }

    fn step_in(
        &mut self,
        inst: &ProtocolInstance,
        s: &SpvpState,
        sender: NodeId,
        receiver: NodeId,
    ) -> Vec<SpvpState> {
        let mut next = s.clone();
        let q = next.buffers.get_mut(&(sender, receiver)).expect("delivery from an empty buffer");
        let msg = q.pop_front().expect("buffers kept non-empty");
        if q.is_empty() {
            next.buffers.remove(&(sender, receiver));
        }
        let imported =
            self.entries[msg as usize].clone().and_then(|e| inst.apply_import(receiver, sender, e));
        let id = self.intern(imported);
        next.rib_in[receiver.index()].insert(sender, id);
        self.adopt(inst, next, receiver)
    }

    /// Applies a link failure mid-run: buffers on dead sessions vanish and
    /// both ends see a withdrawal from each other.
    fn fail_step(&mut self, after: &ProtocolInstance, s: &SpvpState) -> Vec<SpvpState> {
        let mut next = s.clone();
        next.failed = true;
        let mut touched = Vec::new();
        next.buffers.retain(|(a, b), _| after.session_live(*a, *b));
        for n in 0..next.rib_in.len() {
            let node = NodeId(n as u32);
            let dead: Vec<NodeId> =
                next.rib_in[n].keys().copied().filter(|p| !after.session_live(node, *p)).collect();
            let dead_best = self
                .entry(next.best[n])
                .and_then(|e| e.head())
                .map_or(false, |h| !after.session_live(node, h));
            if !dead.is_empty() || dead_best {
                for p in dead {
                    next.rib_in[n].insert(p, WITHDRAWN);
                }
                touched.push(node);
            }
        }
        let mut states = vec![next];
        for n in touched {
            let mut grown = Vec::new();
            for st in states {
                grown.extend(self.adopt(after, st, n));
            }
            states = grown;
        }
        states
    }
}

/// Outcome of an exhaustive enumeration.
#[derive(Debug, Clone, Default)]
pub struct OracleResult {
    pub converged: HashSet<Vec<Best>>,
    /// Some execution exceeded the step bound or revisited a state on the
    /// current path.
    pub divergence_suspected: bool,
    /// The budget or step bound cut the search, so `converged` may be incomplete.
    pub truncated: bool,
    pub states_explored: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Per-execution step bound; defaults to 10 * nodes^2.
    pub step_bound: Option<usize>,
    /// Apply the failures as a transition that may fire at any point rather
    /// than before the first step.
    pub failures_mid_run: bool,
    /// Deliver only into one receiver whose every inbound buffer is non-empty
    /// when such a receiver exists. Such deliveries commute with every
    /// delivery into other nodes, so converged states are preserved.
    pub reduce: bool,
    /// Stop after this many distinct states, flagging divergence.
    pub state_budget: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { step_bound: None, failures_mid_run: false, reduce: true, state_budget: 2_000_000 }
    }
}

pub fn default_step_bound(nodes: usize) -> usize {
    10 * nodes * nodes
}

struct Enumerator<'a> {
    sim: Simulator<'a>,
    after: &'a ProtocolInstance,
    opts: OracleOptions,
    bound: usize,
    seen: HashSet<SpvpState>,
    on_stack: HashSet<SpvpState>,
    converged: HashSet<Vec<Id>>,
    divergence: bool,
    truncated: bool,
}

impl Enumerator<'_> {
    fn saturated_receiver(&self, inst: &ProtocolInstance, s: &SpvpState) -> Option<NodeId> {
        let mut receivers: Vec<NodeId> = s.buffers.keys().map(|k| k.1).collect();
        receivers.dedup();
        receivers.sort();
        receivers.dedup();
        receivers.into_iter().find(|&r| {
            (0..inst.node_count() as u32)
                .map(NodeId)
                .filter(|&x| inst.session_live(x, r))
                .all(|x| s.buffers.contains_key(&(x, r)))
        })
    }

    fn successors(&mut self, s: &SpvpState) -> Vec<SpvpState> {
        let after = self.after;
        let mut out = Vec::new();
        if !s.failed {
            out.extend(self.sim.fail_step(after, s));
            let keys: Vec<_> = s.pending().collect();
            for (a, b) in keys {
                let inst = self.sim.inst;
                out.extend(self.sim.step_in(inst, s, a, b));
            }
            return out;
        }
        let only = if self.opts.reduce { self.saturated_receiver(after, s) } else { None };
        let keys: Vec<_> = s.pending().filter(|(_, r)| only.map_or(true, |o| o == *r)).collect();
        for (a, b) in keys {
            out.extend(self.sim.step_in(after, s, a, b));
        }
        out
    }

    fn dfs(&mut self, s: SpvpState, depth: usize) {
        if self.on_stack.contains(&s) {
            self.divergence = true;
            return;
        }
        if self.seen.len() >= self.opts.state_budget {
            self.divergence = true;
            self.truncated = true;
            return;
        }
        if !self.seen.insert(s.clone()) {
            return;
        }
        let quiet = s.failed && s.is_quiet();
        if quiet {
            self.converged.insert(s.best.clone());
            return;
        }
        if depth >= self.bound {
            self.divergence = true;
            self.truncated = true;
            return;
        }
        let succ = self.successors(&s);
        self.on_stack.insert(s.clone());
        for n in succ {
            self.dfs(n, depth + 1);
        }
        self.on_stack.remove(&s);
    }
}

/// Every converged best-path map reachable under `failures`.
pub fn enumerate_converged(
    inst: &ProtocolInstance,
    failures: &[LinkId],
    opts: OracleOptions,
) -> OracleResult {
    let after = inst.with_failures(failures);
    let bound = opts.step_bound.unwrap_or_else(|| default_step_bound(inst.node_count()));
    let mid = opts.failures_mid_run && !failures.is_empty();
    let mut sim = Simulator::new(if mid { inst } else { &after });
    let mut start = sim.initial();
    start.failed = !mid;
    let mut e = Enumerator {
        sim,
        after: &after,
        opts,
        bound,
        seen: HashSet::new(),
        on_stack: HashSet::new(),
        converged: HashSet::new(),
        divergence: false,
        truncated: false,
    };
    e.dfs(start, 0);
    let converged = e
        .converged
        .iter()
        .map(|b| {
            e.sim.best_of(&SpvpState {
                best: b.clone(),
                rib_in: vec![],
                buffers: BTreeMap::new(),
                failed: true,
            })
        })
        .collect();
    OracleResult {
        converged,
        divergence_suspected: e.divergence,
        truncated: e.truncated,
        states_explored: e.seen.len(),
    }
}

/// One execution under a caller-supplied scheduler. `pick(k)` returns an
/// index below `k`. Returns the converged map and, per node, the step at
/// which its best last changed; None when the bound is hit first.
pub fn random_execution(
    inst: &ProtocolInstance,
    bound: usize,
    pick: &mut dyn FnMut(usize) -> usize,
) -> Option<(Vec<Best>, Vec<usize>)> {
    let mut sim = Simulator::new(inst);
    let mut s = sim.initial();
    let mut last = vec![0usize; inst.node_count()];
    for step in 1..=bound {
        if s.is_quiet() {
            break;
        }
        let keys: Vec<(NodeId, NodeId)> = s.pending().collect();
        let (a, b) = keys[pick(keys.len())];
        let mut succ = sim.step(&s, a, b);
        let next = succ.swap_remove(pick(succ.len()));
        if next.best[b.index()] != s.best[b.index()] {
            last[b.index()] = step;
        }
        s = next;
    }
    s.is_quiet().then(|| (sim.best_of(&s), last))
}

/// JSON-friendly view of a converged set, sorted for stable output.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub converged: Vec<Vec<Best>>,
    pub divergence_suspected: bool,
    pub truncated: bool,
    pub states_explored: usize,
}

impl From<&OracleResult> for OracleReport {
    fn from(r: &OracleResult) -> Self {
        let mut converged: Vec<Vec<Best>> = r.converged.iter().cloned().collect();
        converged.sort_by_cached_key(|m| serde_json::to_string(m).unwrap_or_default());
        OracleReport {
            converged,
            divergence_suspected: r.divergence_suspected,
            truncated: r.truncated,
            states_explored: r.states_explored,
        }
    }
}
