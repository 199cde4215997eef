//! Topology families for experiments: fat trees, rings and lines running OSPF.

use super::input::{LinkSpec, NetworkSpecFile, NodeSpec, OspfSpec, PolicySpec, StaticSpec};
use crate::netmodel::Prefix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StaticMode {
    None,
    /// Core routers point each edge prefix at the aggregation switch OSPF uses.
    Correct,
    /// Like `correct`, but one core sends the first edge prefix into another pod.
    Corrupt,
}

fn node(id: String) -> NodeSpec {
    NodeSpec { id, asn: None, loopback: None }
}

fn link(a: &str, b: &str) -> LinkSpec {
    LinkSpec { a: a.to_string(), b: b.to_string(), cost: 1 }
}

fn edge_prefix(pod: usize, j: usize) -> Prefix {
    format!("10.{pod}.{j}.0/24").parse().expect("valid prefix")
}

/// k-ary fat tree: (k/2)^2 cores, k pods of k/2 aggregation and k/2 edge
/// switches. Every edge switch originates a /24 into OSPF.
pub fn fat_tree(k: usize, statics: StaticMode) -> NetworkSpecFile {
    assert!(k >= 2 && k % 2 == 0, "fat tree arity must be even");
    let h = k / 2;
    let core = |i: usize| format!("core{i}");
    let agg = |p: usize, j: usize| format!("agg{p}_{j}");
    let edge = |p: usize, j: usize| format!("edge{p}_{j}");
    let mut f = NetworkSpecFile::default();
    for i in 0..h * h {
        f.nodes.push(node(core(i)));
    }
    for p in 0..k {
        for j in 0..h {
            f.nodes.push(node(agg(p, j)));
        }
        for j in 0..h {
            f.nodes.push(node(edge(p, j)));
        }
    }
    for p in 0..k {
        for a in 0..h {
            for e in 0..h {
                f.links.push(link(&agg(p, a), &edge(p, e)));
            }
            for c in 0..h {
                f.links.push(link(&agg(p, a), &core(a * h + c)));
            }
        }
    }
    for n in &f.nodes {
        f.ospf.insert(n.id.clone(), OspfSpec::default());
    }
    for p in 0..k {
        for j in 0..h {
            f.ospf.get_mut(&edge(p, j)).unwrap().prefixes.push(edge_prefix(p, j));
        }
    }
    if statics != StaticMode::None {
        for c in 0..h * h {
            let group = c / h;
            let routes = f.statics.entry(core(c)).or_default();
            for p in 0..k {
                for j in 0..h {
                    routes.push(StaticSpec { prefix: edge_prefix(p, j), nexthop: agg(p, group) });
                }
            }
        }
        if statics == StaticMode::Corrupt {
            f.statics.get_mut(&core(0)).unwrap()[0].nexthop = agg(1, 0);
        }
    }
    f.policies.push(PolicySpec::new("loop-freedom"));
    f
}

/// Ring of `n` routers; r0 originates 10.0.0.0/24.
pub fn ring(n: usize) -> NetworkSpecFile {
    let mut f = line(n);
    if n > 2 {
        f.links.push(link(&format!("r{}", n - 1), "r0"));
    }
    f
}

/// Line of `n` routers; r0 originates 10.0.0.0/24.
pub fn line(n: usize) -> NetworkSpecFile {
    let mut f = NetworkSpecFile::default();
    for i in 0..n {
        f.nodes.push(node(format!("r{i}")));
        f.ospf.insert(format!("r{i}"), OspfSpec::default());
    }
    for i in 1..n {
        f.links.push(link(&format!("r{}", i - 1), &format!("r{i}")));
    }
    f.ospf.get_mut("r0").unwrap().prefixes.push("10.0.0.0/24".parse().unwrap());
    f.policies.push(PolicySpec::new("reachability"));
    f
}
