//! Composes the converged per-prefix control-plane results of a class into
//! one forwarding graph: longest prefix first, then administrative distance.

use crate::netmodel::{
    format_address, Address, LinkId, NetworkConfig, NodeId, Prefix, Protocol, StaticNextHop, Topology,
};
use crate::pec::PecTable;
use crate::rpvp::Best;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const AD_CONNECTED: u32 = 0;
pub const AD_STATIC: u32 = 1;
pub const AD_EBGP: u32 = 20;
pub const AD_OSPF: u32 = 110;
pub const AD_IBGP: u32 = 200;

/// Recursive next-hop resolution gives up past this depth.
pub const MAX_RESOLVE_DEPTH: u32 = 4;

/// The converged selection of every node for one (prefix, protocol) run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvergedRun {
    pub prefix: Prefix,
    pub protocol: Protocol,
    pub best: Vec<Best>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "action", content = "next_hops", rename_all = "lowercase")]
pub enum FwdAction {
    Forward(Vec<NodeId>),
    Local,
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteSource {
    Connected,
    Static,
    Ebgp,
    Ospf,
    Ibgp,
}

impl RouteSource {
    pub fn admin_distance(self) -> u32 {
        match self {
            RouteSource::Connected => AD_CONNECTED,
            RouteSource::Static => AD_STATIC,
            RouteSource::Ebgp => AD_EBGP,
            RouteSource::Ospf => AD_OSPF,
            RouteSource::Ibgp => AD_IBGP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FibEntry {
    pub action: FwdAction,
    /// Which route produced the action; None for a plain Drop.
    pub prefix: Option<Prefix>,
    pub source: Option<RouteSource>,
}

impl FibEntry {
    fn drop() -> Self {
        FibEntry { action: FwdAction::Drop, prefix: None, source: None }
    }
}

/// One entry per node for every packet of a class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForwardingGraph {
    pub pec: usize,
    pub entries: Vec<FibEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FibDiagnostic {
    RecursionLimit { node: NodeId, address: String },
}

/// Where one forwarding branch ends.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "end", rename_all = "kebab-case")]
pub enum TraceEnd {
    Delivered,
    Dropped,
    /// The last node of `path` repeats an earlier one.
    Loop,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Trace {
    pub path: Vec<NodeId>,
    pub end: TraceEnd,
}

impl Trace {
    /// The repeated section of a looping trace.
    pub fn cycle(&self) -> Option<&[NodeId]> {
        if self.end != TraceEnd::Loop {
            return None;
        }
        let last = *self.path.last()?;
        let first = self.path.iter().position(|n| *n == last)?;
        Some(&self.path[first..])
    }
}

impl ForwardingGraph {
    pub fn action(&self, n: NodeId) -> &FwdAction {
        &self.entries[n.index()].action
    }

    /// Every forwarding branch from `src`, in next-hop order.
    pub fn traces(&self, src: NodeId) -> Vec<Trace> {
        let mut out = Vec::new();
        let mut path = vec![src];
        self.trace_from(&mut path, &mut out);
        out
    }

    fn trace_from(&self, path: &mut Vec<NodeId>, out: &mut Vec<Trace>) {
        let n = *path.last().unwrap();
        match self.action(n) {
            FwdAction::Local => out.push(Trace { path: path.clone(), end: TraceEnd::Delivered }),
            FwdAction::Drop => out.push(Trace { path: path.clone(), end: TraceEnd::Dropped }),
            FwdAction::Forward(hops) => {
                for h in hops {
                    let looped = path.contains(h);
                    path.push(*h);
                    if looped {
                        out.push(Trace { path: path.clone(), end: TraceEnd::Loop });
                    } else {
                        self.trace_from(path, out);
                    }
                    path.pop();
                }
            }
        }
    }

    /// Cost of the first forwarding branch from `src` to a delivering node,
    /// or None if that branch does not deliver.
    pub fn path_cost(&self, topo: &Topology, src: NodeId) -> Option<u32> {
        let mut cur = src;
        let mut cost = 0u32;
        let mut seen = BTreeSet::new();
        loop {
            if !seen.insert(cur) {
                return None;
            }
            match self.action(cur) {
                FwdAction::Local => return Some(cost),
                FwdAction::Drop => return None,
                FwdAction::Forward(h) => {
                    let next = *h.first()?;
                    cost += topo.link(topo.link_between(cur, next)?).cost;
                    cur = next;
                }
            }
        }
    }

    /// All branches from `src` deliver.
    pub fn reaches(&self, src: NodeId) -> bool {
        self.traces(src).iter().all(|t| t.end == TraceEnd::Delivered)
    }
}

/// Builds forwarding graphs for a set of classes checked together, resolving
/// recursive next hops through `external` graphs of other classes.
pub struct FibBuilder<'a> {
    pub table: &'a PecTable,
    pub topo: &'a Topology,
    pub config: &'a NetworkConfig,
    pub failed: &'a BTreeSet<LinkId>,
    /// Converged runs for the classes being built.
    pub runs: &'a BTreeMap<usize, Vec<ConvergedRun>>,
    /// Finished graphs of classes this set depends on.
    pub external: &'a BTreeMap<usize, ForwardingGraph>,
}

impl<'a> FibBuilder<'a> {
    pub fn build(&self, pec: usize) -> (ForwardingGraph, Vec<FibDiagnostic>) {
        let mut diags = BTreeSet::new();
        let entries = self.topo.nodes().map(|n| self.entry_at(pec, n, 0, &mut diags)).collect();
        (ForwardingGraph { pec, entries }, diags.into_iter().collect())
    }

    fn link_up(&self, a: NodeId, b: NodeId) -> bool {
        self.topo.link_between(a, b).map_or(false, |l| !self.failed.contains(&l))
    }

    fn entry_at(&self, pec: usize, n: NodeId, depth: u32, diags: &mut BTreeSet<FibDiagnostic>) -> FibEntry {
        let class = self.table.get(pec);
        if let Some(lo) = self.topo.node(n).loopback {
            if class.contains(lo) {
                return FibEntry {
                    action: FwdAction::Local,
                    prefix: Some(Prefix::host(lo)),
                    source: Some(RouteSource::Connected),
                };
            }
        }
        let runs = self.runs.get(&pec).map(|v| v.as_slice()).unwrap_or(&[]);
        for (prefix, obj) in class.config.routed_prefixes() {
            if obj.originators.values().any(|s| s.contains(&n)) {
                return FibEntry {
                    action: FwdAction::Local,
                    prefix: Some(prefix),
                    source: Some(RouteSource::Connected),
                };
            }
            let mut cands: Vec<(RouteSource, Vec<NodeId>)> = Vec::new();
            if let Some(hops) = obj.statics.get(&n) {
                let mut set = BTreeSet::new();
                for h in hops {
                    match h {
                        StaticNextHop::Node(m) if self.link_up(n, *m) => {
                            set.insert(*m);
                        }
                        StaticNextHop::Node(_) => {}
                        StaticNextHop::Address(a) => set.extend(self.resolve(n, *a, depth + 1, diags)),
                    }
                }
                if !set.is_empty() {
                    cands.push((RouteSource::Static, set.into_iter().collect()));
                }
            }
            for run in runs.iter().filter(|r| r.prefix == prefix) {
                let best = &run.best[n.index()];
                let Some(primary) = best.primary() else { continue };
                match run.protocol {
                    Protocol::Ospf => cands.push((RouteSource::Ospf, best.next_hops().collect())),
                    Protocol::Bgp => {
                        let head = primary.head().expect("non-origin route has a next hop");
                        let ibgp = matches!(primary.attrs, crate::netmodel::Attrs::Bgp { ibgp: true, .. });
                        if !ibgp {
                            cands.push((RouteSource::Ebgp, vec![head]));
                        } else {
                            let hops = match self.topo.node(head).loopback {
                                Some(lo) if self.topo.node(n).loopback.is_some() => {
                                    self.resolve(n, lo, depth + 1, diags)
                                }
                                _ => vec![head],
                            };
                            if !hops.is_empty() {
                                cands.push((RouteSource::Ibgp, hops));
                            }
                        }
                    }
                    Protocol::Static => {}
                }
            }
            if let Some((src, hops)) = cands.into_iter().min_by_key(|(s, _)| s.admin_distance()) {
                return FibEntry {
                    action: FwdAction::Forward(hops),
                    prefix: Some(prefix),
                    source: Some(src),
                };
            }
        }
        FibEntry::drop()
    }

    /// Next hops at `n` towards `addr`; empty when unresolvable.
    fn resolve(
        &self,
        n: NodeId,
        addr: Address,
        depth: u32,
        diags: &mut BTreeSet<FibDiagnostic>,
    ) -> Vec<NodeId> {
        if depth > MAX_RESOLVE_DEPTH {
            diags.insert(FibDiagnostic::RecursionLimit { node: n, address: format_address(addr) });
            return vec![];
        }
        let pec = self.table.lookup(addr).id;
        let action = match self.external.get(&pec) {
            Some(g) => g.action(n).clone(),
            None if self.runs.contains_key(&pec) => self.entry_at(pec, n, depth, diags).action,
            None => FwdAction::Drop,
        };
        match action {
            FwdAction::Forward(h) => h,
            _ => vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{OspfProcess, RouteEntry};
    use std::sync::Arc;

    fn fg(actions: Vec<FwdAction>) -> ForwardingGraph {
        ForwardingGraph {
            pec: 0,
            entries: actions
                .into_iter()
                .map(|a| FibEntry { action: a, prefix: None, source: None })
                .collect(),
        }
    }

    #[test]
    fn traces_find_loops_and_branches() {
        use FwdAction::*;
        let g = fg(vec![
            Forward(vec![NodeId(1), NodeId(2)]),
            Local,
            Forward(vec![NodeId(3)]),
            Forward(vec![NodeId(2)]),
        ]);
        let t = g.traces(NodeId(0));
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].end, TraceEnd::Delivered);
        assert_eq!(t[1].end, TraceEnd::Loop);
        assert_eq!(t[1].cycle().unwrap(), &[NodeId(2), NodeId(3), NodeId(2)]);
        assert!(!g.reaches(NodeId(0)));
        assert!(g.reaches(NodeId(1)));
    }

    /// a - b - c line, c originates 10.0.0.0/8 in OSPF, a has a static /16
    /// pointing at b.
    fn line() -> (Topology, NetworkConfig) {
        let mut t = Topology::new();
        let a = t.add_node("a", None, None).unwrap();
        let b = t.add_node("b", None, None).unwrap();
        let c = t.add_node("c", None, None).unwrap();
        t.add_link(a, b, 1).unwrap();
        t.add_link(b, c, 1).unwrap();
        let mut cfg = NetworkConfig::new(3);
        for n in [a, b, c] {
            cfg.node_mut(n).ospf = Some(OspfProcess { prefixes: vec![], interfaces: None });
        }
        cfg.node_mut(c).ospf.as_mut().unwrap().prefixes.push("10.0.0.0/8".parse().unwrap());
        cfg.node_mut(a).statics.push(crate::netmodel::StaticRoute {
            prefix: "10.1.0.0/16".parse().unwrap(),
            next_hop: StaticNextHop::Node(b),
        });
        (t, cfg)
    }

    fn ospf_run(prefix: &str) -> ConvergedRun {
        let r = |path: Vec<u32>, cost| {
            Best::Routes(Arc::new(vec![RouteEntry {
                path: path.into_iter().map(NodeId).collect(),
                attrs: crate::netmodel::Attrs::Ospf { cost },
            }]))
        };
        ConvergedRun {
            prefix: prefix.parse().unwrap(),
            protocol: Protocol::Ospf,
            best: vec![r(vec![1, 2], 2), r(vec![2], 1), Best::Epsilon],
        }
    }

    #[test]
    fn longest_prefix_then_distance() {
        let (t, cfg) = line();
        let table = PecTable::from_config(&t, &cfg);
        let inner = table.lookup(crate::netmodel::parse_address("10.1.0.0").unwrap()).id;
        let outer = table.lookup(crate::netmodel::parse_address("10.2.0.0").unwrap()).id;
        let runs: BTreeMap<usize, Vec<ConvergedRun>> =
            [(inner, vec![ospf_run("10.0.0.0/8")]), (outer, vec![ospf_run("10.0.0.0/8")])]
                .into_iter()
                .collect();
        let failed = BTreeSet::new();
        let ext = BTreeMap::new();
        let b = FibBuilder {
            table: &table,
            topo: &t,
            config: &cfg,
            failed: &failed,
            runs: &runs,
            external: &ext,
        };
        let (g, d) = b.build(inner);
        assert!(d.is_empty());
        assert_eq!(g.entries[0].source, Some(RouteSource::Static));
        assert_eq!(g.entries[1].source, Some(RouteSource::Ospf));
        assert_eq!(g.entries[2].action, FwdAction::Local);
        assert!(g.reaches(NodeId(0)));
        let (g2, _) = b.build(outer);
        assert_eq!(g2.entries[0].source, Some(RouteSource::Ospf));

        let failed: BTreeSet<LinkId> = [LinkId(0)].into_iter().collect();
        let b = FibBuilder { failed: &failed, ..b };
        let (g3, _) = b.build(inner);
        // static withdrawn with its link; the OSPF entry would be stale here
        // but still shows the fallback to the shorter prefix's protocol
        assert_eq!(g3.entries[0].source, Some(RouteSource::Ospf));
    }

    #[test]
    fn self_recursive_static_hits_limit() {
        let (t, mut cfg) = line();
        cfg.node_mut(NodeId(1)).statics.push(crate::netmodel::StaticRoute {
            prefix: "20.0.0.0/8".parse().unwrap(),
            next_hop: StaticNextHop::Address(crate::netmodel::parse_address("20.0.0.1").unwrap()),
        });
        let table = PecTable::from_config(&t, &cfg);
        let p = table.lookup(crate::netmodel::parse_address("20.0.0.1").unwrap()).id;
        let runs: BTreeMap<usize, Vec<ConvergedRun>> = [(p, vec![])].into_iter().collect();
        let failed = BTreeSet::new();
        let ext = BTreeMap::new();
        let b = FibBuilder {
            table: &table,
            topo: &t,
            config: &cfg,
            failed: &failed,
            runs: &runs,
            external: &ext,
        };
        let (g, d) = b.build(p);
        assert_eq!(g.entries[1].action, FwdAction::Drop);
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn path_cost_follows_first_branch() {
        use FwdAction::*;
        let (t, _) = line();
        let g = fg(vec![Forward(vec![NodeId(1)]), Forward(vec![NodeId(2)]), Local]);
        assert_eq!(g.path_cost(&t, NodeId(0)), Some(2));
        let g = fg(vec![Forward(vec![NodeId(1)]), Drop, Local]);
        assert_eq!(g.path_cost(&t, NodeId(0)), None);
    }
}
