//! Dependencies between classes (recursive static routes, iBGP sessions that
//! need the loopback classes to resolve) and the order classes are checked in.

mod store;

pub use store::{
    load_matching_outcomes, store_outcome, ChoiceLog, ConvergedOutcome, OutcomeStore, Pick, StoreError,
};

use crate::netmodel::{format_address, Address, NetworkConfig, NodeId, SessionKind, StaticNextHop, Topology};
use crate::pec::PecTable;
use petgraph::graph::DiGraph;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EdgeReason {
    StaticNextHop { node: NodeId, next_hop: String },
    IbgpSession { a: NodeId, b: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum DepDiagnostic {
    /// The next hop lies in a class nothing ever routes.
    UnroutedNextHop { from: usize, to: usize, address: String },
}

/// Edge `a -> b` means class `a` depends on class `b`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DependencyGraph {
    pub vertex_count: usize,
    pub edges: BTreeMap<(usize, usize), BTreeSet<EdgeReason>>,
    pub diagnostics: Vec<DepDiagnostic>,
}

impl DependencyGraph {
    pub fn new(vertex_count: usize) -> Self {
        DependencyGraph { vertex_count, ..Default::default() }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, reason: EdgeReason) {
        assert!(from < self.vertex_count && to < self.vertex_count);
        self.edges.entry((from, to)).or_default().insert(reason);
    }

    pub fn depends_on(&self, from: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((from, 0)..=(from, usize::MAX)).map(|((_, t), _)| *t)
    }

    pub fn has_dependents(&self, pec: usize) -> bool {
        self.edges.keys().any(|(f, t)| *t == pec && *f != pec)
    }

    pub fn is_edgeless(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Adds an edge for every static route whose next hop is an address, and for
/// every BGP-routed class towards the classes of iBGP session loopbacks.
pub fn build_dependency_graph(pecs: &PecTable, topo: &Topology, config: &NetworkConfig) -> DependencyGraph {
    let mut g = DependencyGraph::new(pecs.len());
    let link = |g: &mut DependencyGraph, from: usize, addr: Address, reason: EdgeReason| {
        let to = pecs.lookup(addr).id;
        if !pecs.get(to).has_routes() {
            g.diagnostics.push(DepDiagnostic::UnroutedNextHop { from, to, address: format_address(addr) });
        }
        g.add_edge(from, to, reason);
    };

    let mut ibgp_pairs = BTreeSet::new();
    for n in topo.nodes() {
        if let Some(bgp) = &config.node(n).bgp {
            for s in bgp.sessions.iter().filter(|s| s.kind == SessionKind::Ibgp) {
                let (a, b) = (n.min(s.peer), n.max(s.peer));
                if let (Some(la), Some(lb)) = (topo.node(a).loopback, topo.node(b).loopback) {
                    ibgp_pairs.insert((a, b, la, lb));
                }
            }
        }
    }

    for pec in &pecs.pecs {
        for (_, obj) in pec.config.routed_prefixes() {
            for (node, hops) in &obj.statics {
                for h in hops {
                    if let StaticNextHop::Address(addr) = h {
                        let reason =
                            EdgeReason::StaticNextHop { node: *node, next_hop: format_address(*addr) };
                        link(&mut g, pec.id, *addr, reason);
                    }
                }
            }
            if obj.originators.contains_key(&crate::netmodel::Protocol::Bgp) {
                for &(a, b, la, lb) in &ibgp_pairs {
                    link(&mut g, pec.id, la, EdgeReason::IbgpSession { a, b });
                    link(&mut g, pec.id, lb, EdgeReason::IbgpSession { a, b });
                }
            }
        }
    }
    g.diagnostics.sort();
    g.diagnostics.dedup();
    g
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SccGroup {
    pub id: usize,
    pub pecs: Vec<usize>,
    /// More than one class, or a class depending on itself.
    pub recursive: bool,
    /// Groups this one waits for.
    pub deps: Vec<usize>,
    /// Longest dependency chain below this group; groups of equal level can
    /// run side by side.
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schedule {
    pub groups: Vec<SccGroup>,
    /// Group id per class.
    pub group_of: Vec<usize>,
}

impl Schedule {
    pub fn group(&self, pec: usize) -> &SccGroup {
        &self.groups[self.group_of[pec]]
    }

    /// Groups that something else depends on.
    pub fn has_dependents(&self, group: usize) -> bool {
        self.groups.iter().any(|g| g.deps.contains(&group))
    }
}

/// Collapses strongly connected components and orders them so every group
/// comes after the groups it depends on.
pub fn compute_schedule(graph: &DependencyGraph) -> Schedule {
    let mut g: DiGraph<usize, ()> = DiGraph::new();
    let idx: Vec<_> = (0..graph.vertex_count).map(|i| g.add_node(i)).collect();
    for &(a, b) in graph.edges.keys() {
        g.add_edge(idx[a], idx[b], ());
    }
    // Tarjan emits a component only after everything reachable from it, so
    // dependencies come out first.
    let sccs = petgraph::algo::tarjan_scc(&g);
    let mut group_of = vec![0; graph.vertex_count];
    let mut groups = Vec::with_capacity(sccs.len());
    for (gid, comp) in sccs.iter().enumerate() {
        let mut pecs: Vec<usize> = comp.iter().map(|n| g[*n]).collect();
        pecs.sort();
        for p in &pecs {
            group_of[*p] = gid;
        }
        let recursive = pecs.len() > 1 || graph.edges.contains_key(&(pecs[0], pecs[0]));
        groups.push(SccGroup { id: gid, pecs, recursive, deps: vec![], level: 0 });
    }
    for gid in 0..groups.len() {
        let mut deps: BTreeSet<usize> = BTreeSet::new();
        for &p in &groups[gid].pecs {
            for t in graph.depends_on(p) {
                if group_of[t] != gid {
                    deps.insert(group_of[t]);
                }
            }
        }
        let level = deps.iter().map(|d| groups[*d].level + 1).max().unwrap_or(0);
        groups[gid].deps = deps.into_iter().collect();
        groups[gid].level = level;
    }
    Schedule { groups, group_of }
}
