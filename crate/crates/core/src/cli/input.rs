//! The JSON network description read by the command line.

use crate::netmodel::{
    parse_address, validate_config, BgpProcess, BgpSession, Diagnostic, ModelError, NetworkConfig, NodeId,
    OspfProcess, Prefix, RouteMap, RouteMapClause, SessionKind, StaticNextHop, StaticRoute, Topology,
};
use crate::policy::{Policy, PolicyKind};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Syntax { path: PathBuf, line: usize, column: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown route map `{0}`")]
    UnknownRouteMap(String),
    #[error("node `{0}` runs BGP but has no `as`")]
    MissingAs(String),
    #[error("invalid static next hop `{0}`")]
    BadNextHop(String),
    #[error("invalid loopback `{0}`")]
    BadLoopback(String),
    #[error("policy `{policy}`: {message}")]
    BadPolicy { policy: String, message: String },
    #[error("configuration is inconsistent: {0:?}")]
    Invalid(Vec<Diagnostic>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpecFile {
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ospf: BTreeMap<String, OspfSpec>,
    #[serde(default, skip_serializing_if = "BgpSpec::is_empty")]
    pub bgp: BgpSpec,
    #[serde(default, rename = "static", skip_serializing_if = "BTreeMap::is_empty")]
    pub statics: BTreeMap<String, Vec<StaticSpec>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub route_maps: BTreeMap<String, Vec<RouteMapClause>>,
    #[serde(default)]
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub environment: Environment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    #[serde(default, rename = "as", skip_serializing_if = "Option::is_none")]
    pub asn: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loopback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    #[serde(default = "one")]
    pub cost: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OspfSpec {
    #[serde(default)]
    pub prefixes: Vec<Prefix>,
    /// Neighbors to form adjacencies with; absent means all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interfaces: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BgpSpec {
    #[serde(default)]
    pub sessions: Vec<SessionSpec>,
    #[serde(default)]
    pub originate: BTreeMap<String, Vec<Prefix>>,
}

impl BgpSpec {
    fn is_empty(&self) -> bool {
        self.sessions.is_empty() && self.originate.is_empty()
    }
}

/// A session between `a` and `b`. `import` and `export` map an endpoint to
/// the route map it applies on this session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    pub a: String,
    pub b: String,
    pub kind: SessionKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub import: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub export: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticSpec {
    pub prefix: Prefix,
    /// A neighbor's name or an IPv4 address.
    pub nexthop: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interesting: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<Prefix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destinations: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoints: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_hops: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub devices: Option<Vec<String>>,
}

impl PolicySpec {
    pub fn new(kind: &str) -> Self {
        PolicySpec {
            name: None,
            kind: kind.to_string(),
            sources: None,
            interesting: None,
            prefix: None,
            destinations: None,
            waypoints: None,
            max_hops: None,
            devices: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    #[serde(default)]
    pub max_failures: usize,
}

/// Everything the checker needs from a spec file.
#[derive(Debug, Clone)]
pub struct LoadedNetwork {
    pub topo: Topology,
    pub config: NetworkConfig,
    pub policies: Vec<Policy>,
    pub environment: Environment,
}

pub fn read_spec(path: &Path) -> Result<NetworkSpecFile, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| InputError::Io { path: path.to_path_buf(), source })?;
    parse_spec(&text, path)
}

pub fn parse_spec(text: &str, path: &Path) -> Result<NetworkSpecFile, InputError> {
    serde_json::from_str(text).map_err(|e| InputError::Syntax {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

impl NetworkSpecFile {
    pub fn load(&self) -> Result<LoadedNetwork, InputError> {
        let mut topo = Topology::new();
        for n in &self.nodes {
            let lb = match &n.loopback {
                Some(s) => Some(parse_address(s).ok_or_else(|| InputError::BadLoopback(s.clone()))?),
                None => None,
            };
            topo.add_node(&n.id, n.asn, lb)?;
        }
        let node =
            |name: &str| topo.node_by_name(name).ok_or_else(|| ModelError::UnknownNode(name.to_string()));
        let mut links = Vec::new();
        for l in &self.links {
            links.push((node(&l.a)?, node(&l.b)?, l.cost));
        }
        for (a, b, c) in links {
            topo.add_link(a, b, c)?;
        }
        let node =
            |name: &str| topo.node_by_name(name).ok_or_else(|| ModelError::UnknownNode(name.to_string()));
        let mut config = NetworkConfig::new(topo.node_count());
        for (name, clauses) in &self.route_maps {
            config.route_maps.insert(name.clone(), Arc::new(RouteMap::new(name, clauses.clone())));
        }
        let map = |name: Option<&String>| -> Result<Option<Arc<RouteMap>>, InputError> {
            match name {
                None => Ok(None),
                Some(m) => config
                    .route_maps
                    .get(m)
                    .cloned()
                    .map(Some)
                    .ok_or_else(|| InputError::UnknownRouteMap(m.clone())),
            }
        };
        let mut per_node: Vec<crate::netmodel::NodeConfig> = vec![Default::default(); topo.node_count()];
        for (name, o) in &self.ospf {
            let n = node(name)?;
            let interfaces = match &o.interfaces {
                Some(i) => Some(i.iter().map(|x| node(x)).collect::<Result<Vec<NodeId>, _>>()?),
                None => None,
            };
            per_node[n.index()].ospf = Some(OspfProcess { prefixes: o.prefixes.clone(), interfaces });
        }
        let ensure_bgp = |per_node: &mut Vec<crate::netmodel::NodeConfig>,
                          n: NodeId|
         -> Result<(), InputError> {
            if per_node[n.index()].bgp.is_none() {
                let asn = topo.node(n).asn.ok_or_else(|| InputError::MissingAs(topo.name(n).to_string()))?;
                per_node[n.index()].bgp = Some(BgpProcess { asn, sessions: vec![], originate: vec![] });
            }
            Ok(())
        };
        for s in &self.bgp.sessions {
            let (a, b) = (node(&s.a)?, node(&s.b)?);
            for (me, peer, my_name) in [(a, b, &s.a), (b, a, &s.b)] {
                ensure_bgp(&mut per_node, me)?;
                let sess = BgpSession {
                    peer,
                    kind: s.kind,
                    import: map(s.import.get(my_name))?,
                    export: map(s.export.get(my_name))?,
                };
                per_node[me.index()].bgp.as_mut().unwrap().sessions.push(sess);
            }
        }
        for (name, prefixes) in &self.bgp.originate {
            let n = node(name)?;
            ensure_bgp(&mut per_node, n)?;
            per_node[n.index()].bgp.as_mut().unwrap().originate.extend(prefixes.iter().copied());
        }
        for (name, routes) in &self.statics {
            let n = node(name)?;
            for r in routes {
                let next_hop = match (topo.node_by_name(&r.nexthop), parse_address(&r.nexthop)) {
                    (Some(m), _) => StaticNextHop::Node(m),
                    (None, Some(a)) => StaticNextHop::Address(a),
                    _ => return Err(InputError::BadNextHop(r.nexthop.clone())),
                };
                per_node[n.index()].statics.push(StaticRoute { prefix: r.prefix, next_hop });
            }
        }
        config.nodes = per_node;
        let diags = validate_config(&topo, &config);
        if !diags.is_empty() {
            return Err(InputError::Invalid(diags));
        }
        let mut policies = Vec::new();
        for (i, p) in self.policies.iter().enumerate() {
            policies.push(policy_of(p, i, &topo)?);
        }
        Ok(LoadedNetwork { topo, config, policies, environment: self.environment.clone() })
    }
}

fn policy_of(p: &PolicySpec, index: usize, topo: &Topology) -> Result<Policy, InputError> {
    let name = p.name.clone().unwrap_or_else(|| format!("{}-{}", p.kind, index));
    let bad = |m: &str| InputError::BadPolicy { policy: name.clone(), message: m.to_string() };
    let nodes = |v: &Option<Vec<String>>| -> Result<Option<BTreeSet<NodeId>>, InputError> {
        match v {
            None => Ok(None),
            Some(v) => v
                .iter()
                .map(|x| topo.node_by_name(x).ok_or_else(|| bad(&format!("unknown node `{x}`"))))
                .collect::<Result<BTreeSet<_>, _>>()
                .map(Some),
        }
    };
    let kind = match p.kind.as_str() {
        "reachability" => PolicyKind::Reachability { destinations: nodes(&p.destinations)? },
        "loop-freedom" | "loop" => PolicyKind::LoopFreedom,
        "blackhole-freedom" | "black-hole-freedom" => PolicyKind::BlackHoleFreedom,
        "waypoint" => {
            PolicyKind::Waypoint { waypoints: nodes(&p.waypoints)?.ok_or_else(|| bad("needs waypoints"))? }
        }
        "bounded-path-length" | "path-length" => {
            PolicyKind::BoundedPathLength { max_hops: p.max_hops.ok_or_else(|| bad("needs max_hops"))? }
        }
        "multipath-consistency" => PolicyKind::MultipathConsistency,
        "path-consistency" => {
            PolicyKind::PathConsistency { devices: nodes(&p.devices)?.ok_or_else(|| bad("needs devices"))? }
        }
        other => return Err(bad(&format!("unknown kind `{other}`"))),
    };
    Ok(Policy {
        name: name.clone(),
        kind,
        sources: nodes(&p.sources)?,
        interesting: nodes(&p.interesting)?,
        prefix: p.prefix,
    })
}
