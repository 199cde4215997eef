//! Depth-first search over protocol states of one instance.

use super::det::DetOracle;
use super::intern::{key_of_slots, RouteEntryTable, TableStats};
use super::visited::VisitedSet;
use crate::netmodel::{LinkId, NodeId, ProtocolInstance};
use crate::rpvp::{analyze, apply_with_status, Best, Choice, NodeStatus, ProtocolState};
use serde::Serialize;
use std::collections::BTreeSet;
use std::ops::ControlFlow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reductions {
    /// Abandon states where a node would change a path it already selected.
    pub consistent: bool,
    pub det_nodes: bool,
    /// Explore one group of nodes that cannot influence each other.
    pub independence: bool,
}

impl Reductions {
    pub const ALL: Reductions = Reductions { consistent: true, det_nodes: true, independence: true };
    pub const NONE: Reductions = Reductions { consistent: false, det_nodes: false, independence: false };
}

/// Early termination for policies that only look at some sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcePrune {
    pub sources: BTreeSet<NodeId>,
    /// Also disable nodes that cannot influence any source.
    pub restrict: bool,
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub reductions: Reductions,
    pub prune: Option<SourcePrune>,
    /// Bloom filter size in bits; None keeps exact keys.
    pub bitstate: Option<u64>,
    pub failed: Vec<LinkId>,
}

impl SearchConfig {
    pub fn new(reductions: Reductions) -> Self {
        SearchConfig { reductions, prune: None, bitstate: None, failed: vec![] }
    }
}

/// A move taken on the way to an emitted state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Step {
    pub node: NodeId,
    pub choice: Choice,
    /// Other moves available at the same state.
    pub alternatives: Vec<(NodeId, Choice)>,
}

#[derive(Debug, Clone)]
pub struct Emitted {
    pub best: Vec<Best>,
    pub steps: Vec<Step>,
    /// Stopped before convergence because every source had decided.
    pub early: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub states_explored: u64,
    pub states_deduped: u64,
    pub branch_points: u64,
    pub converged: u64,
    pub abandoned: u64,
    pub max_depth: usize,
    pub table: Option<TableStats>,
    pub visited_bytes: usize,
}

impl SearchStats {
    pub fn add(&mut self, o: &SearchStats) {
        self.states_explored += o.states_explored;
        self.states_deduped += o.states_deduped;
        self.branch_points += o.branch_points;
        self.converged += o.converged;
        self.abandoned += o.abandoned;
        self.max_depth = self.max_depth.max(o.max_depth);
        self.visited_bytes = self.visited_bytes.max(o.visited_bytes);
    }
}

enum Expansion {
    Emit { early: bool },
    Abandon,
    Children(Vec<(NodeId, Choice)>, Vec<NodeStatus>),
}

struct Frame {
    state: ProtocolState,
    slots: Vec<u64>,
    moves: Vec<(NodeId, Choice)>,
    status: Vec<NodeStatus>,
    next: usize,
}

pub struct Search<'a> {
    inst: &'a ProtocolInstance,
    cfg: &'a SearchConfig,
    det: DetOracle,
    table: RouteEntryTable,
    visited: VisitedSet,
    pub stats: SearchStats,
}

impl<'a> Search<'a> {
    pub fn new(inst: &'a ProtocolInstance, cfg: &'a SearchConfig) -> Self {
        let det = if cfg.reductions.det_nodes { DetOracle::new(inst) } else { DetOracle::Off };
        let visited = match cfg.bitstate {
            Some(bits) => VisitedSet::bitstate(bits, 3),
            None => VisitedSet::exact(),
        };
        Search { inst, cfg, det, table: RouteEntryTable::new(), visited, stats: SearchStats::default() }
    }

    pub fn table(&self) -> &RouteEntryTable {
        &self.table
    }

    fn expand(&mut self, state: &ProtocolState) -> Expansion {
        let inst = self.inst;
        let red = self.cfg.reductions;
        let status = analyze(inst, state);
        let all: Vec<NodeId> =
            (0..status.len()).filter(|i| status[*i].enabled()).map(|i| NodeId(i as u32)).collect();
        if all.is_empty() {
            return Expansion::Emit { early: false };
        }
        if red.consistent
            && all.iter().any(|n| {
                let s = &status[n.index()];
                state.get(*n).is_selected() && (s.invalid || !s.extends)
            })
        {
            return Expansion::Abandon;
        }
        let mut enabled = all;
        if let Some(p) = &self.cfg.prune {
            if p.sources.iter().all(|s| state.get(*s).is_selected()) {
                return Expansion::Emit { early: true };
            }
            if p.restrict {
                let reach = influence(inst, state, &p.sources);
                enabled.retain(|n| reach[n.index()]);
                if enabled.is_empty() {
                    return Expansion::Emit { early: true };
                }
            }
        }
        let mut chosen = match self.det.find(inst, state, &status, &enabled, red.consistent) {
            Some(n) => vec![n],
            None => enabled,
        };
        if chosen.len() > 1 && red.independence && red.consistent && !inst.multipath {
            let comp = component(inst, state, chosen[0]);
            chosen.retain(|n| comp[n.index()]);
        }
        let moves: Vec<(NodeId, Choice)> = chosen
            .iter()
            .flat_map(|n| status[n.index()].choices(inst.multipath).into_iter().map(move |c| (*n, c)))
            .collect();
        Expansion::Children(moves, status)
    }

    /// Runs the search, calling `visit` on each emitted state until it breaks.
    pub fn run(&mut self, visit: &mut dyn FnMut(&Emitted) -> ControlFlow<()>) -> SearchStats {
        let init = ProtocolState::initial(self.inst);
        let slots = self.table.slots(&init);
        self.visited.insert(key_of_slots(&slots, &self.cfg.failed));
        let mut stack: Vec<Frame> = Vec::new();
        if self.enter(init, slots, &mut stack, visit).is_break() {
            return self.finish();
        }
        while let Some(top) = stack.last_mut() {
            if top.next >= top.moves.len() {
                stack.pop();
                continue;
            }
            let (n, c) = top.moves[top.next];
            top.next += 1;
            let next = apply_with_status(self.inst, &top.state, n, &top.status[n.index()], c)
                .expect("moves come from the node's own choices");
            let mut slots = top.slots.clone();
            slots[n.index()] = self.table.slot(next.get(n));
            if !self.visited.insert(key_of_slots(&slots, &self.cfg.failed)) {
                self.stats.states_deduped += 1;
                continue;
            }
            if self.enter(next, slots, &mut stack, visit).is_break() {
                break;
            }
        }
        self.finish()
    }

    fn enter(
        &mut self,
        state: ProtocolState,
        slots: Vec<u64>,
        stack: &mut Vec<Frame>,
        visit: &mut dyn FnMut(&Emitted) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        self.stats.states_explored += 1;
        self.stats.max_depth = self.stats.max_depth.max(stack.len());
        match self.expand(&state) {
            Expansion::Emit { early } => {
                self.stats.converged += 1;
                let steps = steps_of(stack);
                visit(&Emitted { best: state.best, steps, early })
            }
            Expansion::Abandon => {
                self.stats.abandoned += 1;
                ControlFlow::Continue(())
            }
            Expansion::Children(moves, status) => {
                if moves.len() > 1 {
                    self.stats.branch_points += 1;
                }
                stack.push(Frame { state, slots, moves, status, next: 0 });
                ControlFlow::Continue(())
            }
        }
    }

    fn finish(&mut self) -> SearchStats {
        self.stats.table = Some(self.table.stats());
        self.stats.visited_bytes = self.visited.bytes();
        self.stats
    }
}

fn steps_of(stack: &[Frame]) -> Vec<Step> {
    stack
        .iter()
        .map(|f| {
            let (node, choice) = f.moves[f.next - 1];
            let alternatives = f.moves.iter().filter(|m| **m != (node, choice)).copied().collect();
            Step { node, choice, alternatives }
        })
        .collect()
}

/// Nodes connected to `start` through live sessions without passing a node
/// that has selected.
fn component(inst: &ProtocolInstance, state: &ProtocolState, start: NodeId) -> Vec<bool> {
    let mut seen = vec![false; inst.node_count()];
    let mut stack = vec![start];
    seen[start.index()] = true;
    while let Some(n) = stack.pop() {
        for s in inst.peers(n) {
            let m = s.peer;
            if !seen[m.index()] && !state.get(m).is_selected() {
                seen[m.index()] = true;
                stack.push(m);
            }
        }
    }
    seen
}

/// Nodes whose choice can still reach an undecided source.
fn influence(inst: &ProtocolInstance, state: &ProtocolState, sources: &BTreeSet<NodeId>) -> Vec<bool> {
    let mut seen = vec![false; inst.node_count()];
    for s in sources {
        if !state.get(*s).is_selected() && !seen[s.index()] {
            let comp = component(inst, state, *s);
            for (i, c) in comp.into_iter().enumerate() {
                seen[i] |= c;
            }
        }
    }
    seen
}

/// All converged states of `inst` under `cfg`.
pub fn converged_set(inst: &ProtocolInstance, cfg: &SearchConfig) -> (Vec<Vec<Best>>, SearchStats) {
    let mut out = Vec::new();
    let stats = Search::new(inst, cfg).run(&mut |e| {
        out.push(e.best.clone());
        ControlFlow::Continue(())
    });
    (out, stats)
}
