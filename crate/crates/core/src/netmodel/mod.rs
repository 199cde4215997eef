//! Core network vocabulary: addressing, topology, per-node protocol
//! configuration, route entries and the per-prefix protocol instance that
//! import/export filters and ranking are evaluated against.

mod config;
mod instance;
mod route;

pub use config::{
    validate_config, BgpProcess, BgpSession, ClauseAction, ClauseMatch, Diagnostic, NetworkConfig,
    NodeConfig, OspfProcess, RouteMap, RouteMapClause, SessionKind, StaticNextHop, StaticRoute,
};
pub use instance::{ProtocolInstance, Session};
pub use route::{rank_compare, Attrs, Protocol, Rank, RouteEntry, DEFAULT_LOCAL_PREF};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid prefix `{0}`")]
    BadPrefix(String),
    #[error("prefix `{0}` has host bits set")]
    HostBits(String),
    #[error("self-loop link on node {0}")]
    SelfLoop(String),
    #[error("duplicate link between {0} and {1}")]
    ParallelLink(String, String),
    #[error("link cost must be at least 1 ({0}-{1})")]
    ZeroCost(String, String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
}

/// An IPv4 address as a plain 32-bit value.
pub type Address = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub u32);

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Inclusive address range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrefixRange {
    pub lo: Address,
    pub hi: Address,
}

impl PrefixRange {
    pub fn contains(&self, addr: Address) -> bool {
        self.lo <= addr && addr <= self.hi
    }

    pub fn size(&self) -> u64 {
        self.hi as u64 - self.lo as u64 + 1
    }
}

impl fmt::Display for PrefixRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", Ipv4Addr::from(self.lo), Ipv4Addr::from(self.hi))
    }
}

/// A base address plus mask length. The base never has host bits set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    addr: Address,
    len: u8,
}

impl Prefix {
    pub const DEFAULT: Prefix = Prefix { addr: 0, len: 0 };

    pub fn new(addr: Address, len: u8) -> Result<Self, ModelError> {
        if len > 32 {
            return Err(ModelError::BadPrefix(format!("{}/{}", Ipv4Addr::from(addr), len)));
        }
        if addr & !mask(len) != 0 {
            return Err(ModelError::HostBits(format!("{}/{}", Ipv4Addr::from(addr), len)));
        }
        Ok(Prefix { addr, len })
    }

    /// Builds the prefix of length `len` covering `addr`, clearing host bits.
    pub fn covering(addr: Address, len: u8) -> Self {
        assert!(len <= 32);
        Prefix { addr: addr & mask(len), len }
    }

    pub fn host(addr: Address) -> Self {
        Prefix { addr, len: 32 }
    }

    pub fn addr(&self) -> Address {
        self.addr
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn range(&self) -> PrefixRange {
        PrefixRange { lo: self.addr, hi: self.addr | !mask(self.len) }
    }

    pub fn contains_addr(&self, addr: Address) -> bool {
        addr & mask(self.len) == self.addr
    }

    /// True when `other` lies inside `self` (including equality).
    pub fn covers(&self, other: &Prefix) -> bool {
        other.len >= self.len && self.contains_addr(other.addr)
    }

    /// Bit `i` (0 = most significant) of the base address.
    pub fn bit(&self, i: u8) -> bool {
        (self.addr >> (31 - i)) & 1 == 1
    }
}

fn mask(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - len as u32)
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", Ipv4Addr::from(self.addr), self.len)
    }
}

impl FromStr for Prefix {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, l) = match s.split_once('/') {
            Some((a, l)) => (a, Some(l)),
            None => (s, None),
        };
        let addr: Ipv4Addr = a.trim().parse().map_err(|_| ModelError::BadPrefix(s.to_string()))?;
        let len = match l {
            Some(l) => l.trim().parse::<u8>().map_err(|_| ModelError::BadPrefix(s.to_string()))?,
            None => 32,
        };
        Prefix::new(u32::from(addr), len)
    }
}

impl Serialize for Prefix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Prefix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn parse_address(s: &str) -> Option<Address> {
    s.trim().parse::<Ipv4Addr>().ok().map(u32::from)
}

pub fn format_address(a: Address) -> String {
    Ipv4Addr::from(a).to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub name: String,
    pub asn: Option<u32>,
    pub loopback: Option<Address>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub cost: u32,
}

impl Link {
    pub fn other(&self, n: NodeId) -> NodeId {
        if n == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Nodes and links. Link ids are dense and assigned in insertion order.
#[derive(Debug, Clone, Default)]
pub struct Topology {
    nodes: Vec<NodeInfo>,
    links: Vec<Link>,
    adjacency: Vec<Vec<(NodeId, LinkId)>>,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(
        &mut self,
        name: &str,
        asn: Option<u32>,
        loopback: Option<Address>,
    ) -> Result<NodeId, ModelError> {
        if self.node_by_name(name).is_some() {
            return Err(ModelError::DuplicateNode(name.to_string()));
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(NodeInfo { name: name.to_string(), asn, loopback });
        self.adjacency.push(Vec::new());
        Ok(id)
    }

    pub fn add_link(&mut self, a: NodeId, b: NodeId, cost: u32) -> Result<LinkId, ModelError> {
        if a == b {
            return Err(ModelError::SelfLoop(self.name(a).to_string()));
        }
        if cost == 0 {
            return Err(ModelError::ZeroCost(self.name(a).to_string(), self.name(b).to_string()));
        }
        if self.link_between(a, b).is_some() {
            return Err(ModelError::ParallelLink(self.name(a).to_string(), self.name(b).to_string()));
        }
        let id = LinkId(self.links.len() as u32);
        self.links.push(Link { a, b, cost });
        self.adjacency[a.index()].push((b, id));
        self.adjacency[b.index()].push((a, id));
        self.adjacency[a.index()].sort();
        self.adjacency[b.index()].sort();
        Ok(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn node(&self, n: NodeId) -> &NodeInfo {
        &self.nodes[n.index()]
    }

    pub fn name(&self, n: NodeId) -> &str {
        &self.nodes[n.index()].name
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(|i| NodeId(i as u32))
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, l: LinkId) -> &Link {
        &self.links[l.index()]
    }

    /// Neighbors of `n` with the joining link, sorted by neighbor id.
    pub fn neighbors(&self, n: NodeId) -> &[(NodeId, LinkId)] {
        &self.adjacency[n.index()]
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.adjacency.get(a.index())?.iter().find(|(m, _)| *m == b).map(|(_, l)| *l)
    }

    pub fn node_owning(&self, addr: Address) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.loopback == Some(addr)).map(|i| NodeId(i as u32))
    }
}
