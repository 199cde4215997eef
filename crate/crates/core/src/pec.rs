//! Packet equivalence classes. Every prefix mentioned in the configuration
//! is inserted into a binary trie; walking the trie splits the address space
//! into ranges covered by the same set of prefixes, and ranges sharing a
//! merged config form one class.

use crate::netmodel::{
    format_address, Address, NetworkConfig, NodeId, Prefix, PrefixRange, Protocol, StaticNextHop, Topology,
};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Everything the configuration says about one prefix.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ConfigObject {
    /// Nodes originating the prefix, per protocol.
    pub originators: BTreeMap<Protocol, BTreeSet<NodeId>>,
    pub statics: BTreeMap<NodeId, BTreeSet<StaticNextHop>>,
    /// Route maps with a clause matching on this prefix.
    pub route_maps: BTreeSet<String>,
}

impl ConfigObject {
    pub fn is_empty(&self) -> bool {
        self.originators.is_empty() && self.statics.is_empty() && self.route_maps.is_empty()
    }

    pub fn has_routes(&self) -> bool {
        !self.originators.is_empty() || !self.statics.is_empty()
    }

    pub fn merge(&mut self, other: &ConfigObject) {
        for (p, ns) in &other.originators {
            self.originators.entry(*p).or_default().extend(ns.iter().copied());
        }
        for (n, hs) in &other.statics {
            self.statics.entry(*n).or_default().extend(hs.iter().copied());
        }
        self.route_maps.extend(other.route_maps.iter().cloned());
    }
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: [Option<u32>; 2],
    object: Option<ConfigObject>,
}

/// One level per address bit, no path compression.
#[derive(Debug, Clone)]
pub struct PrefixTrie {
    nodes: Vec<TrieNode>,
}

impl Default for PrefixTrie {
    fn default() -> Self {
        PrefixTrie::new()
    }
}

impl PrefixTrie {
    /// A trie holding only the default object at the root.
    pub fn new() -> Self {
        PrefixTrie { nodes: vec![TrieNode { children: [None, None], object: Some(ConfigObject::default()) }] }
    }

    /// The config object for `prefix`, created on first use.
    pub fn object_mut(&mut self, prefix: Prefix) -> &mut ConfigObject {
        let mut cur = 0usize;
        for i in 0..prefix.len() {
            let b = prefix.bit(i) as usize;
            cur = match self.nodes[cur].children[b] {
                Some(c) => c as usize,
                None => {
                    self.nodes.push(TrieNode::default());
                    let id = self.nodes.len() - 1;
                    self.nodes[cur].children[b] = Some(id as u32);
                    id
                }
            };
        }
        self.nodes[cur].object.get_or_insert_with(ConfigObject::default)
    }

    pub fn get(&self, prefix: Prefix) -> Option<&ConfigObject> {
        let mut cur = 0usize;
        for i in 0..prefix.len() {
            cur = self.nodes[cur].children[prefix.bit(i) as usize]? as usize;
        }
        self.nodes[cur].object.as_ref()
    }

    /// Number of attached config objects, the root default included.
    pub fn object_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.object.is_some()).count()
    }

    /// All (prefix, object) pairs in trie order.
    pub fn objects(&self) -> Vec<(Prefix, &ConfigObject)> {
        let mut out = Vec::new();
        self.collect(0, 0, 0, &mut out);
        out
    }

    fn collect<'a>(
        &'a self,
        node: usize,
        depth: u8,
        addr: Address,
        out: &mut Vec<(Prefix, &'a ConfigObject)>,
    ) {
        let n = &self.nodes[node];
        if let Some(o) = &n.object {
            out.push((Prefix::covering(addr, depth), o));
        }
        for b in 0..2u32 {
            if let Some(c) = n.children[b as usize] {
                self.collect(c as usize, depth + 1, addr | (b << (31 - depth as u32)), out);
            }
        }
    }
}

/// Inserts every originated, statically routed or route-map matched prefix.
pub fn build_trie(topo: &Topology, config: &NetworkConfig) -> PrefixTrie {
    let mut trie = PrefixTrie::new();
    for n in topo.nodes() {
        for p in config.ospf_originated(topo, n) {
            trie.object_mut(p).originators.entry(Protocol::Ospf).or_default().insert(n);
        }
        let c = config.node(n);
        if let Some(bgp) = &c.bgp {
            for p in &bgp.originate {
                trie.object_mut(*p).originators.entry(Protocol::Bgp).or_default().insert(n);
            }
        }
        for s in &c.statics {
            trie.object_mut(s.prefix).statics.entry(n).or_default().insert(s.next_hop);
        }
    }
    for (name, map) in &config.route_maps {
        for p in map.referenced_prefixes() {
            trie.object_mut(p).route_maps.insert(name.clone());
        }
    }
    trie
}

/// Network-wide view for one class: the contributing prefixes, longest first,
/// each with its own object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MergedConfig {
    pub prefixes: Vec<(Prefix, ConfigObject)>,
}

impl MergedConfig {
    /// Adds a covering prefix, keeping longest-first order. Adding an already
    /// present prefix unions the objects.
    pub fn merge(&mut self, prefix: Prefix, object: &ConfigObject) {
        if let Some((_, o)) = self.prefixes.iter_mut().find(|(p, _)| *p == prefix) {
            o.merge(object);
            return;
        }
        let pos =
            self.prefixes.iter().position(|(p, _)| p.len() < prefix.len()).unwrap_or(self.prefixes.len());
        self.prefixes.insert(pos, (prefix, object.clone()));
    }

    /// Prefixes that carry a route of some kind (origins or static routes).
    pub fn routed_prefixes(&self) -> impl Iterator<Item = (Prefix, &ConfigObject)> + '_ {
        self.prefixes.iter().filter(|(_, o)| o.has_routes()).map(|(p, o)| (*p, o))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PacketEquivalenceClass {
    pub id: usize,
    /// Disjoint, sorted, non-adjacent ranges.
    pub ranges: Vec<PrefixRange>,
    pub config: MergedConfig,
}

impl PacketEquivalenceClass {
    pub fn contains(&self, addr: Address) -> bool {
        self.ranges.iter().any(|r| r.contains(addr))
    }

    pub fn prefixes(&self) -> impl Iterator<Item = Prefix> + '_ {
        self.config.prefixes.iter().map(|(p, _)| *p)
    }

    pub fn has_routes(&self) -> bool {
        self.config.routed_prefixes().next().is_some()
    }

    /// Lowest address, used to pick a representative packet.
    pub fn representative(&self) -> Address {
        self.ranges[0].lo
    }
}

/// Walks the trie and returns the classes sorted by their lowest address.
pub fn compute_pecs(trie: &PrefixTrie) -> Vec<PacketEquivalenceClass> {
    let mut pieces: Vec<(PrefixRange, MergedConfig)> = Vec::new();
    walk(trie, 0, 0, 0, &MergedConfig::default(), &mut pieces);

    let mut groups: BTreeMap<MergedConfig, Vec<PrefixRange>> = BTreeMap::new();
    for (r, cfg) in pieces {
        let ranges = groups.entry(cfg).or_default();
        match ranges.last_mut() {
            Some(last) if last.hi as u64 + 1 == r.lo as u64 => last.hi = r.hi,
            _ => ranges.push(r),
        }
    }
    let mut pecs: Vec<PacketEquivalenceClass> =
        groups.into_iter().map(|(config, ranges)| PacketEquivalenceClass { id: 0, ranges, config }).collect();
    pecs.sort_by_key(|p| p.ranges[0].lo);
    for (i, p) in pecs.iter_mut().enumerate() {
        p.id = i;
    }
    pecs
}

fn walk(
    trie: &PrefixTrie,
    node: usize,
    depth: u8,
    addr: Address,
    covering: &MergedConfig,
    out: &mut Vec<(PrefixRange, MergedConfig)>,
) {
    let n = &trie.nodes[node];
    let mut here;
    let cfg = match &n.object {
        // The root default object is only a contributing prefix when something
        // actually configures 0.0.0.0/0.
        Some(o) if !(depth == 0 && o.is_empty()) => {
            here = covering.clone();
            here.merge(Prefix::covering(addr, depth), o);
            &here
        }
        _ => covering,
    };
    if n.children == [None, None] {
        out.push((Prefix::covering(addr, depth).range(), cfg.clone()));
        return;
    }
    for b in 0..2u32 {
        let child_addr = addr | (b << (31 - depth as u32));
        match n.children[b as usize] {
            Some(c) => walk(trie, c as usize, depth + 1, child_addr, cfg, out),
            None => out.push((Prefix::covering(child_addr, depth + 1).range(), cfg.clone())),
        }
    }
}

/// Classes plus a sorted range table for address lookup.
#[derive(Debug, Clone)]
pub struct PecTable {
    pub pecs: Vec<PacketEquivalenceClass>,
    index: Vec<(PrefixRange, usize)>,
}

impl PecTable {
    pub fn new(pecs: Vec<PacketEquivalenceClass>) -> Self {
        let mut index: Vec<(PrefixRange, usize)> =
            pecs.iter().flat_map(|p| p.ranges.iter().map(move |r| (*r, p.id))).collect();
        index.sort();
        PecTable { pecs, index }
    }

    pub fn from_config(topo: &Topology, config: &NetworkConfig) -> Self {
        PecTable::new(compute_pecs(&build_trie(topo, config)))
    }

    pub fn lookup(&self, addr: Address) -> &PacketEquivalenceClass {
        let i = self.index.partition_point(|(r, _)| r.hi < addr);
        &self.pecs[self.index[i].1]
    }

    pub fn get(&self, id: usize) -> &PacketEquivalenceClass {
        &self.pecs[id]
    }

    pub fn len(&self) -> usize {
        self.pecs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pecs.is_empty()
    }

    /// One row per contiguous range, in address order.
    pub fn dump_rows(&self) -> Vec<PecRow> {
        self.index
            .iter()
            .map(|(r, id)| PecRow {
                id: *id,
                lo: format_address(r.lo),
                hi: format_address(r.hi),
                prefixes: self.pecs[*id].prefixes().map(|p| p.to_string()).collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PecRow {
    pub id: usize,
    pub lo: String,
    pub hi: String,
    pub prefixes: Vec<String>,
}
