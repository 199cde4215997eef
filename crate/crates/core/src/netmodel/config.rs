use super::route::{Attrs, RouteEntry};
use super::{format_address, Address, NodeId, Prefix, Topology};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionKind {
    Ebgp,
    Ibgp,
}

/// Match part of a route-map clause. All present conditions must hold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseMatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<Prefix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub len_min: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub len_max: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub community: Option<u32>,
}

impl ClauseMatch {
    /// Prefix-list semantics: a bare prefix matches exactly; with length
    /// bounds it matches any more-specific prefix inside the bounds.
    pub fn matches(&self, prefix: &Prefix, entry: &RouteEntry) -> bool {
        let len_ok = match self.prefix {
            Some(m) => {
                if !m.covers(prefix) {
                    return false;
                }
                if self.len_min.is_none() && self.len_max.is_none() {
                    prefix.len() == m.len()
                } else {
                    let lo = self.len_min.unwrap_or(m.len());
                    let hi = self.len_max.unwrap_or(32);
                    (lo..=hi).contains(&prefix.len())
                }
            }
            None => {
                let lo = self.len_min.unwrap_or(0);
                let hi = self.len_max.unwrap_or(32);
                (lo..=hi).contains(&prefix.len())
            }
        };
        if !len_ok {
            return false;
        }
        match self.community {
            Some(c) => entry.communities().map_or(false, |cs| cs.contains(&c)),
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum ClauseAction {
    Deny,
    Permit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        set_local_pref: Option<u32>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        add_community: Vec<u32>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        delete_community: Vec<u32>,
    },
}

impl ClauseAction {
    pub fn permit() -> Self {
        ClauseAction::Permit { set_local_pref: None, add_community: vec![], delete_community: vec![] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteMapClause {
    #[serde(default, rename = "match")]
    pub matches: ClauseMatch,
    #[serde(flatten)]
    pub action: ClauseAction,
}

/// Ordered clauses, first match wins, and no match means deny.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RouteMap {
    pub name: String,
    pub clauses: Vec<RouteMapClause>,
}

impl RouteMap {
    pub fn new(name: &str, clauses: Vec<RouteMapClause>) -> Self {
        RouteMap { name: name.to_string(), clauses }
    }

    pub fn permit_all(name: &str) -> Self {
        RouteMap::new(
            name,
            vec![RouteMapClause { matches: ClauseMatch::default(), action: ClauseAction::permit() }],
        )
    }

    pub fn deny_all(name: &str) -> Self {
        RouteMap::new(name, vec![])
    }

    /// Applies the map. Never touches the path.
    pub fn apply(&self, prefix: &Prefix, mut entry: RouteEntry) -> Option<RouteEntry> {
        let clause = self.clauses.iter().find(|c| c.matches.matches(prefix, &entry))?;
        match &clause.action {
            ClauseAction::Deny => None,
            ClauseAction::Permit { set_local_pref, add_community, delete_community } => {
                if let Attrs::Bgp { local_pref, communities, .. } = &mut entry.attrs {
                    if let Some(lp) = set_local_pref {
                        *local_pref = *lp;
                    }
                    for c in delete_community {
                        communities.retain(|x| x != c);
                    }
                    for c in add_community {
                        if let Err(pos) = communities.binary_search(c) {
                            communities.insert(pos, *c);
                        }
                    }
                }
                Some(entry)
            }
        }
    }

    /// Highest local-pref this map can leave on a route whose incoming
    /// local-pref is at most `incoming`. None when the map denies everything.
    pub fn local_pref_bound(&self, incoming: u32) -> Option<u32> {
        self.clauses
            .iter()
            .filter_map(|c| match &c.action {
                ClauseAction::Deny => None,
                ClauseAction::Permit { set_local_pref, .. } => Some(set_local_pref.unwrap_or(incoming)),
            })
            .max()
    }

    pub fn referenced_prefixes(&self) -> impl Iterator<Item = Prefix> + '_ {
        self.clauses.iter().filter_map(|c| c.matches.prefix)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OspfProcess {
    pub prefixes: Vec<Prefix>,
    /// Neighbors OSPF is enabled towards; None means every OSPF neighbor.
    pub interfaces: Option<Vec<NodeId>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BgpSession {
    pub peer: NodeId,
    pub kind: SessionKind,
    pub import: Option<Arc<RouteMap>>,
    pub export: Option<Arc<RouteMap>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BgpProcess {
    pub asn: u32,
    pub sessions: Vec<BgpSession>,
    pub originate: Vec<Prefix>,
}

impl BgpProcess {
    pub fn session_to(&self, peer: NodeId) -> Option<&BgpSession> {
        self.sessions.iter().find(|s| s.peer == peer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StaticNextHop {
    Node(NodeId),
    Address(Address),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StaticRoute {
    pub prefix: Prefix,
    pub next_hop: StaticNextHop,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeConfig {
    pub ospf: Option<OspfProcess>,
    pub bgp: Option<BgpProcess>,
    pub statics: Vec<StaticRoute>,
}

/// Per-node protocol configuration for a whole network, indexed by node id.
#[derive(Debug, Clone, Default)]
pub struct NetworkConfig {
    pub nodes: Vec<NodeConfig>,
    pub route_maps: BTreeMap<String, Arc<RouteMap>>,
}

impl NetworkConfig {
    pub fn new(node_count: usize) -> Self {
        NetworkConfig { nodes: vec![NodeConfig::default(); node_count], route_maps: BTreeMap::new() }
    }

    pub fn node(&self, n: NodeId) -> &NodeConfig {
        &self.nodes[n.index()]
    }

    pub fn node_mut(&mut self, n: NodeId) -> &mut NodeConfig {
        &mut self.nodes[n.index()]
    }

    /// Prefixes a node originates into OSPF, including its loopback.
    pub fn ospf_originated(&self, topo: &Topology, n: NodeId) -> Vec<Prefix> {
        let Some(ospf) = &self.node(n).ospf else {
            return vec![];
        };
        let mut out = ospf.prefixes.clone();
        if let Some(lo) = topo.node(n).loopback {
            out.push(Prefix::host(lo));
        }
        out.sort();
        out.dedup();
        out
    }

    /// Every prefix that has some origin anywhere or a static route.
    pub fn routed_prefixes(&self, topo: &Topology) -> Vec<Prefix> {
        let mut out = Vec::new();
        for n in topo.nodes() {
            out.extend(self.ospf_originated(topo, n));
            let c = self.node(n);
            if let Some(bgp) = &c.bgp {
                out.extend(bgp.originate.iter().copied());
            }
            out.extend(c.statics.iter().map(|s| s.prefix));
        }
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Diagnostic {
    AsymmetricSession { a: String, b: String },
    AsMismatch { a: String, b: String },
    MissingAsn { node: String },
    EbgpNotAdjacent { a: String, b: String },
    UnresolvableStaticNextHop { node: String, prefix: String, next_hop: String },
    StaticNextHopNotNeighbor { node: String, prefix: String, next_hop: String },
}

/// Reports violations of the configuration invariants. Empty means well-formed.
pub fn validate_config(topo: &Topology, config: &NetworkConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let routed = config.routed_prefixes(topo);
    for n in topo.nodes() {
        let c = config.node(n);
        if let Some(bgp) = &c.bgp {
            if topo.node(n).asn.is_none() {
                out.push(Diagnostic::MissingAsn { node: topo.name(n).to_string() });
            }
            for s in &bgp.sessions {
                let (a, b) = (topo.name(n).to_string(), topo.name(s.peer).to_string());
                let back = config.node(s.peer).bgp.as_ref().and_then(|p| p.session_to(n));
                if back.is_none() {
                    out.push(Diagnostic::AsymmetricSession { a: a.clone(), b: b.clone() });
                }
                let same_as = topo.node(n).asn == topo.node(s.peer).asn;
                let kind_ok = match s.kind {
                    SessionKind::Ibgp => same_as,
                    SessionKind::Ebgp => !same_as,
                };
                if !kind_ok || back.map_or(false, |bs| bs.kind != s.kind) {
                    // report once per unordered pair
                    if n < s.peer || back.is_none() {
                        out.push(Diagnostic::AsMismatch { a: a.clone(), b: b.clone() });
                    }
                }
                if s.kind == SessionKind::Ebgp && topo.link_between(n, s.peer).is_none() && n < s.peer {
                    out.push(Diagnostic::EbgpNotAdjacent { a, b });
                }
            }
        }
        for st in &c.statics {
            match st.next_hop {
                StaticNextHop::Node(m) => {
                    if topo.link_between(n, m).is_none() {
                        out.push(Diagnostic::StaticNextHopNotNeighbor {
                            node: topo.name(n).to_string(),
                            prefix: st.prefix.to_string(),
                            next_hop: topo.name(m).to_string(),
                        });
                    }
                }
                StaticNextHop::Address(a) => {
                    if !routed.iter().any(|p| p.contains_addr(a)) {
                        out.push(Diagnostic::UnresolvableStaticNextHop {
                            node: topo.name(n).to_string(),
                            prefix: st.prefix.to_string(),
                            next_hop: format_address(a),
                        });
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}
