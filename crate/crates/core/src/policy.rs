//! Data-plane policies checked against every converged forwarding graph.

use crate::fib::{ConvergedRun, ForwardingGraph, FwdAction, RouteSource, Trace, TraceEnd};
use crate::netmodel::{NodeId, Prefix, Protocol, Topology};
use crate::pec::PacketEquivalenceClass;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Every source delivers, to one of `destinations` when given.
    Reachability {
        destinations: Option<BTreeSet<NodeId>>,
    },
    LoopFreedom,
    BlackHoleFreedom,
    /// Every delivered path from a source visits a waypoint.
    Waypoint {
        waypoints: BTreeSet<NodeId>,
    },
    BoundedPathLength {
        max_hops: usize,
    },
    /// All branches from a source end the same way at the same node.
    MultipathConsistency,
    /// The listed devices agree on control-plane route and data-plane outcome.
    PathConsistency {
        devices: BTreeSet<NodeId>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub name: String,
    pub kind: PolicyKind,
    /// Sources to check from; None means every node.
    pub sources: Option<BTreeSet<NodeId>>,
    /// Nodes whose position on a path matters; None means every node.
    pub interesting: Option<BTreeSet<NodeId>>,
    /// Restrict to classes overlapping this prefix; None means every class
    /// that carries routes.
    pub prefix: Option<Prefix>,
}

impl Policy {
    pub fn new(name: &str, kind: PolicyKind) -> Self {
        Policy { name: name.to_string(), kind, sources: None, interesting: None, prefix: None }
    }

    pub fn with_sources(mut self, sources: impl IntoIterator<Item = NodeId>) -> Self {
        self.sources = Some(sources.into_iter().collect());
        self
    }

    pub fn with_prefix(mut self, prefix: Prefix) -> Self {
        self.prefix = Some(prefix);
        self
    }

    pub fn applies_to(&self, pec: &PacketEquivalenceClass) -> bool {
        match self.prefix {
            Some(p) => {
                let r = p.range();
                pec.ranges.iter().any(|x| x.lo <= r.hi && r.lo <= x.hi)
            }
            None => pec.has_routes(),
        }
    }

    pub fn source_nodes(&self, topo: &Topology) -> BTreeSet<NodeId> {
        match &self.sources {
            Some(s) => s.clone(),
            None => topo.nodes().collect(),
        }
    }

    /// Node ids the policy mentions, for validation.
    pub fn referenced_nodes(&self) -> BTreeSet<NodeId> {
        let mut out: BTreeSet<NodeId> = BTreeSet::new();
        out.extend(self.sources.iter().flatten());
        out.extend(self.interesting.iter().flatten());
        match &self.kind {
            PolicyKind::Reachability { destinations: Some(d) } => out.extend(d),
            PolicyKind::Waypoint { waypoints } => out.extend(waypoints),
            PolicyKind::PathConsistency { devices } => out.extend(devices),
            _ => {}
        }
        out
    }

    fn key_nodes(&self, topo: &Topology) -> BTreeSet<NodeId> {
        let mut s = match &self.interesting {
            Some(i) => i.clone(),
            None => topo.nodes().collect(),
        };
        match &self.kind {
            PolicyKind::Waypoint { waypoints } => s.extend(waypoints),
            PolicyKind::Reachability { destinations: Some(d) } => s.extend(d),
            _ => {}
        }
        s
    }
}

/// Everything a check may look at for one converged combination.
pub struct CheckInput<'a> {
    pub topo: &'a Topology,
    pub pec: &'a PacketEquivalenceClass,
    pub graph: &'a ForwardingGraph,
    /// Converged control-plane runs of this class.
    pub runs: &'a [ConvergedRun],
    /// Forwarding graphs of the classes this one depends on.
    pub deps: &'a BTreeMap<usize, ForwardingGraph>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub source: Option<NodeId>,
    pub path: Vec<NodeId>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum CheckResult {
    Pass,
    Fail(Witness),
}

impl CheckResult {
    pub fn is_pass(&self) -> bool {
        matches!(self, CheckResult::Pass)
    }
}

fn fail(source: Option<NodeId>, path: Vec<NodeId>, detail: impl Into<String>) -> CheckResult {
    CheckResult::Fail(Witness { source, path, detail: detail.into() })
}

/// The control-plane view of one device used by path consistency.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ControlView {
    pub source: Option<RouteSource>,
    pub prefix: Option<Prefix>,
    pub local_pref: Option<u32>,
}

fn control_view(input: &CheckInput, n: NodeId) -> ControlView {
    let e = &input.graph.entries[n.index()];
    let local_pref = input
        .runs
        .iter()
        .filter(|r| r.protocol == Protocol::Bgp && Some(r.prefix) == e.prefix)
        .find_map(|r| r.best[n.index()].primary().and_then(|x| x.local_pref()));
    ControlView { source: e.source, prefix: e.prefix, local_pref }
}

/// (end kind, end node, hop count) per branch.
fn outcomes(traces: &[Trace]) -> BTreeSet<(TraceEnd, Option<NodeId>, usize)> {
    traces
        .iter()
        .map(|t| {
            let end = if t.end == TraceEnd::Loop { None } else { t.path.last().copied() };
            (t.end.clone(), end, t.path.len() - 1)
        })
        .collect()
}

pub fn check(policy: &Policy, input: &CheckInput) -> CheckResult {
    let g = input.graph;
    let sources = policy.source_nodes(input.topo);
    match &policy.kind {
        PolicyKind::PathConsistency { devices } => {
            let mut first: Option<(NodeId, ControlView, BTreeSet<(TraceEnd, usize)>)> = None;
            for &d in devices {
                let view = control_view(input, d);
                let data: BTreeSet<(TraceEnd, usize)> =
                    g.traces(d).into_iter().map(|t| (t.end, t.path.len() - 1)).collect();
                match &first {
                    None => first = Some((d, view, data)),
                    Some((f, v, dd)) => {
                        if *v != view || *dd != data {
                            return fail(Some(d), vec![*f, d], format!("{} and {} disagree", f, d));
                        }
                    }
                }
            }
            CheckResult::Pass
        }
        _ => {
            for &s in &sources {
                let traces = g.traces(s);
                if let Some(r) = check_source(policy, s, &traces, g) {
                    return r;
                }
            }
            CheckResult::Pass
        }
    }
}

fn check_source(policy: &Policy, s: NodeId, traces: &[Trace], g: &ForwardingGraph) -> Option<CheckResult> {
    match &policy.kind {
        PolicyKind::Reachability { destinations } => {
            for t in traces {
                let last = *t.path.last().unwrap();
                let ok =
                    t.end == TraceEnd::Delivered && destinations.as_ref().map_or(true, |d| d.contains(&last));
                if !ok {
                    return Some(fail(Some(s), t.path.clone(), format!("{:?} at {}", t.end, last)));
                }
            }
        }
        PolicyKind::LoopFreedom => {
            if let Some(t) = traces.iter().find(|t| t.end == TraceEnd::Loop) {
                return Some(fail(Some(s), t.cycle().unwrap().to_vec(), "forwarding loop"));
            }
        }
        PolicyKind::BlackHoleFreedom => {
            if let Some(t) = traces.iter().find(|t| t.end == TraceEnd::Dropped) {
                return Some(fail(Some(s), t.path.clone(), "dropped"));
            }
        }
        PolicyKind::Waypoint { waypoints } => {
            for t in traces.iter().filter(|t| t.end == TraceEnd::Delivered) {
                if !t.path.iter().any(|n| waypoints.contains(n)) {
                    return Some(fail(Some(s), t.path.clone(), "no waypoint on path"));
                }
            }
        }
        PolicyKind::BoundedPathLength { max_hops } => {
            for t in traces {
                if t.end == TraceEnd::Loop || t.path.len() - 1 > *max_hops {
                    return Some(fail(Some(s), t.path.clone(), format!("longer than {max_hops} hops")));
                }
            }
        }
        PolicyKind::MultipathConsistency => {
            let ends: BTreeSet<(TraceEnd, Option<NodeId>)> =
                outcomes(traces).into_iter().map(|(e, n, _)| (e, n)).collect();
            let multipath = traces
                .iter()
                .any(|t| t.path.iter().any(|n| matches!(g.action(*n), FwdAction::Forward(h) if h.len() > 1)));
            if multipath && ends.len() > 1 {
                let bad = traces.iter().find(|t| t.end != TraceEnd::Delivered).unwrap_or(&traces[0]);
                return Some(fail(Some(s), bad.path.clone(), "branches disagree"));
            }
        }
        PolicyKind::PathConsistency { .. } => unreachable!("handled per device set"),
    }
    None
}

/// What a policy can observe of a graph; equal keys give equal verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EquivalenceKey {
    paths: Vec<(NodeId, Vec<PathShape>)>,
    control: Vec<(NodeId, ControlView)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct PathShape {
    hops: usize,
    interesting: Vec<(usize, NodeId)>,
    end: TraceEnd,
    last: NodeId,
    multipath: bool,
}

pub fn equivalence_key(policy: &Policy, input: &CheckInput) -> EquivalenceKey {
    let g = input.graph;
    let keyed = policy.key_nodes(input.topo);
    let srcs: BTreeSet<NodeId> = match &policy.kind {
        PolicyKind::PathConsistency { devices } => devices.clone(),
        _ => policy.source_nodes(input.topo),
    };
    let paths = srcs
        .iter()
        .map(|&s| {
            let shapes = g
                .traces(s)
                .into_iter()
                .map(|t| PathShape {
                    hops: t.path.len() - 1,
                    interesting: t
                        .path
                        .iter()
                        .enumerate()
                        .filter(|(_, n)| keyed.contains(n))
                        .map(|(i, n)| (i, *n))
                        .collect(),
                    end: t.end.clone(),
                    last: *t.path.last().unwrap(),
                    multipath: t
                        .path
                        .iter()
                        .any(|n| matches!(g.action(*n), FwdAction::Forward(h) if h.len() > 1)),
                })
                .collect();
            (s, shapes)
        })
        .collect();
    let control = match &policy.kind {
        PolicyKind::PathConsistency { devices } => {
            devices.iter().map(|d| (*d, control_view(input, *d))).collect()
        }
        _ => vec![],
    };
    EquivalenceKey { paths, control }
}
