//! Link-failure scenarios, optionally reduced to one link per class of
//! equivalent links.

use crate::netmodel::{LinkId, NetworkConfig, NodeId, Prefix, Protocol, StaticNextHop, Topology};
use crate::pec::PacketEquivalenceClass;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Coarsest stable partition of the nodes: members of a class have equal
/// signatures and equal multisets of (neighbor class, link cost) over live links.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DevicePartition {
    pub class_of: Vec<usize>,
    pub classes: Vec<Vec<NodeId>>,
}

impl DevicePartition {
    pub fn refine<S: Ord + Clone>(topo: &Topology, signature: &[S], failed: &BTreeSet<LinkId>) -> Self {
        let n = topo.node_count();
        let mut class_of = renumber(signature);
        loop {
            let keys: Vec<(usize, Vec<(usize, u32)>)> = (0..n)
                .map(|i| {
                    let mut nb: Vec<(usize, u32)> = topo
                        .neighbors(NodeId(i as u32))
                        .iter()
                        .filter(|(_, l)| !failed.contains(l))
                        .map(|(m, l)| (class_of[m.index()], topo.link(*l).cost))
                        .collect();
                    nb.sort();
                    (class_of[i], nb)
                })
                .collect();
            let next = renumber(&keys);
            let stable = count(&next) == count(&class_of);
            class_of = next;
            if stable {
                break;
            }
        }
        let mut classes = vec![Vec::new(); count(&class_of)];
        for (i, c) in class_of.iter().enumerate() {
            classes[*c].push(NodeId(i as u32));
        }
        DevicePartition { class_of, classes }
    }

    /// Live links grouped by the unordered pair of classes they join.
    pub fn link_classes(
        &self,
        topo: &Topology,
        failed: &BTreeSet<LinkId>,
    ) -> BTreeMap<(usize, usize), Vec<LinkId>> {
        let mut out: BTreeMap<(usize, usize), Vec<LinkId>> = BTreeMap::new();
        for (i, l) in topo.links().iter().enumerate() {
            let id = LinkId(i as u32);
            if failed.contains(&id) {
                continue;
            }
            let (a, b) = (self.class_of[l.a.index()], self.class_of[l.b.index()]);
            out.entry((a.min(b), a.max(b))).or_default().push(id);
        }
        out
    }
}

fn count(class_of: &[usize]) -> usize {
    class_of.iter().max().map_or(0, |m| m + 1)
}

/// Dense class ids numbered by first occurrence of each distinct key.
fn renumber<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut ids: BTreeMap<K, usize> = BTreeMap::new();
    keys.iter()
        .map(|k| {
            let next = ids.len();
            *ids.entry(k.clone()).or_insert(next)
        })
        .collect()
}

/// Local facts that must match for two nodes to share a class.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeSignature {
    Plain {
        ospf: bool,
        originates: Vec<(Prefix, Protocol)>,
    },
    /// Nodes that can never be merged with another.
    Unique(NodeId),
}

/// Signatures for checking one class: policy-named nodes, BGP speakers, nodes
/// with OSPF interface restrictions, and static route owners and targets
/// stand alone.
pub fn node_signatures(
    topo: &Topology,
    config: &NetworkConfig,
    pec: &PacketEquivalenceClass,
    interesting: &BTreeSet<NodeId>,
) -> Vec<NodeSignature> {
    let mut unique: BTreeSet<NodeId> = interesting.clone();
    let mut originates: BTreeMap<NodeId, Vec<(Prefix, Protocol)>> = BTreeMap::new();
    for (p, obj) in pec.config.routed_prefixes() {
        for (proto, nodes) in &obj.originators {
            for n in nodes {
                originates.entry(*n).or_default().push((p, *proto));
            }
        }
        for (n, hops) in &obj.statics {
            unique.insert(*n);
            for h in hops {
                match h {
                    StaticNextHop::Node(m) => {
                        unique.insert(*m);
                    }
                    StaticNextHop::Address(a) => unique.extend(topo.node_owning(*a)),
                }
            }
        }
    }
    topo.nodes()
        .map(|n| {
            let c = config.node(n);
            let restricted = c.ospf.as_ref().map_or(false, |o| o.interfaces.is_some());
            if unique.contains(&n) || c.bgp.is_some() || restricted {
                NodeSignature::Unique(n)
            } else {
                let mut o = originates.get(&n).cloned().unwrap_or_default();
                o.sort();
                NodeSignature::Plain { ospf: c.ospf.is_some(), originates: o }
            }
        })
        .collect()
}

/// Every set of at most `k` links, as ascending id lists in lexicographic
/// order within each size.
pub fn all_combinations(link_count: usize, k: usize) -> Vec<Vec<LinkId>> {
    let mut out = vec![vec![]];
    let mut frontier: Vec<Vec<LinkId>> = vec![vec![]];
    for _ in 0..k.min(link_count) {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |l| l.index() + 1);
            for i in start..link_count {
                let mut t = s.clone();
                t.push(LinkId(i as u32));
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Failure scenarios with at most `k` failed links. With signatures, each
/// pick takes the lowest link of each link class and the partition is
/// refined with the picked links removed before the next pick.
pub fn enumerate_failures<S: Ord + Clone>(
    topo: &Topology,
    k: usize,
    signatures: Option<&[S]>,
) -> Vec<Vec<LinkId>> {
    let Some(sig) = signatures else {
        return all_combinations(topo.link_count(), k);
    };
    let mut seen: BTreeSet<Vec<LinkId>> = BTreeSet::new();
    let mut out = vec![vec![]];
    seen.insert(vec![]);
    let mut frontier: Vec<BTreeSet<LinkId>> = vec![BTreeSet::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for failed in &frontier {
            let part = DevicePartition::refine(topo, sig, failed);
            for links in part.link_classes(topo, failed).values() {
                let mut f = failed.clone();
                f.insert(links[0]);
                let v: Vec<LinkId> = f.iter().copied().collect();
                if seen.insert(v.clone()) {
                    out.push(v);
                    next.push(f);
                }
            }
        }
        frontier = next;
    }
    out
}
