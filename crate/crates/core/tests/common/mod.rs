//! Random small protocol instances shared by the integration tests.
#![allow(dead_code)]

use cpcheck::checker::{converged_set, Reductions, SearchConfig};
use cpcheck::netmodel::{
    ClauseAction, ClauseMatch, LinkId, NodeId, Prefix, Protocol, ProtocolInstance, RouteMap, RouteMapClause,
    SessionKind,
};
use cpcheck::rpvp::Best;
use cpcheck::spvp_oracle::{enumerate_converged, OracleOptions, OracleResult};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashSet};

/// Oracle runs past this many states count as truncated and are skipped.
pub const ORACLE_BUDGET: usize = 150_000;

pub struct Case {
    pub seed: u64,
    pub inst: ProtocolInstance,
    pub failures: Vec<LinkId>,
    pub links: usize,
}

impl Case {
    pub fn failed_instance(&self) -> ProtocolInstance {
        self.inst.with_failures(&self.failures)
    }

    pub fn config(&self, red: Reductions) -> SearchConfig {
        let mut cfg = SearchConfig::new(red);
        cfg.failed = self.failures.clone();
        cfg
    }

    pub fn checker_set(&self, red: Reductions) -> HashSet<Vec<Best>> {
        let (v, _) = converged_set(&self.failed_instance(), &self.config(red));
        v.into_iter().collect()
    }

    pub fn oracle(&self, mid_run: bool) -> OracleResult {
        let opts = OracleOptions {
            failures_mid_run: mid_run,
            state_budget: ORACLE_BUDGET,
            ..OracleOptions::default()
        };
        enumerate_converged(&self.inst, &self.failures, opts)
    }
}

fn clause(matches: ClauseMatch, action: ClauseAction) -> RouteMapClause {
    RouteMapClause { matches, action }
}

fn permit_with(lp: Option<u32>, add: Vec<u32>) -> ClauseAction {
    ClauseAction::Permit { set_local_pref: lp, add_community: add, delete_community: vec![] }
}

fn random_map(rng: &mut ChaCha8Rng, prefixes: &[Prefix]) -> RouteMap {
    let mut clauses = Vec::new();
    if rng.gen_bool(0.3) {
        let c = rng.gen_range(1..=2);
        clauses.push(clause(ClauseMatch { community: Some(c), ..Default::default() }, ClauseAction::Deny));
    }
    if prefixes.len() > 1 && rng.gen_bool(0.3) {
        let p = *prefixes.choose(rng).unwrap();
        let lp = *[50, 150, 200].choose(rng).unwrap();
        clauses.push(clause(
            ClauseMatch { prefix: Some(p), ..Default::default() },
            permit_with(Some(lp), vec![]),
        ));
    }
    let lp = *[None, Some(100), Some(150), Some(200)].choose(rng).unwrap();
    let add = if rng.gen_bool(0.3) { vec![rng.gen_range(1..=2)] } else { vec![] };
    clauses.push(clause(ClauseMatch::default(), permit_with(lp, add)));
    RouteMap::new("m", clauses)
}

/// A connected graph on `n` nodes: random spanning tree plus up to two
/// extra edges. Denser graphs make the message-level oracle too slow.
fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        edges.insert((j, i));
    }
    for _ in 0..rng.gen_range(0..=2) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    edges.into_iter().collect()
}

/// One random scenario: 3 to 5 nodes, BGP with random import filters or
/// single-path OSPF, at most one failure. With two prefixes the second
/// origin set and prefix-specific clauses differ, so each prefix becomes its
/// own case.
pub fn random_cases(seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=5);
    let edges = random_graph(&mut rng, n);
    let bgp = rng.gen_bool(0.6);
    let prefixes: Vec<Prefix> = if rng.gen_bool(0.4) {
        vec!["10.0.0.0/8".parse().unwrap(), "20.0.0.0/8".parse().unwrap()]
    } else {
        vec!["10.0.0.0/8".parse().unwrap()]
    };
    let costs: Vec<u32> = edges.iter().map(|_| rng.gen_range(1..=3)).collect();
    let imports: Vec<[Option<RouteMap>; 2]> = edges
        .iter()
        .map(|_| {
            let mut m = || if rng.gen_bool(0.45) { Some(random_map(&mut rng, &prefixes)) } else { None };
            [m(), m()]
        })
        .collect();
    let failures =
        if rng.gen_bool(0.5) { vec![LinkId(rng.gen_range(0..edges.len()) as u32)] } else { vec![] };
    let mut out = Vec::new();
    for p in &prefixes {
        let origin_count = rng.gen_range(1..=2);
        let mut nodes: Vec<usize> = (0..n).collect();
        nodes.shuffle(&mut rng);
        let proto = if bgp { Protocol::Bgp } else { Protocol::Ospf };
        let mut b = ProtocolInstance::builder(proto, *p, n);
        for o in &nodes[..origin_count] {
            b = b.origin(NodeId(*o as u32));
        }
        for (i, &(x, y)) in edges.iter().enumerate() {
            let (x, y) = (NodeId(x as u32), NodeId(y as u32));
            if bgp {
                b = b.session(x, y, Some(SessionKind::Ebgp), costs[i], Some(LinkId(i as u32)));
            } else {
                b = b.session(x, y, None, costs[i], Some(LinkId(i as u32)));
            }
        }
        if bgp {
            for i in 0..n {
                b = b.asn(NodeId(i as u32), 100 + i as u32);
            }
            for (i, &(x, y)) in edges.iter().enumerate() {
                let (x, y) = (NodeId(x as u32), NodeId(y as u32));
                if let Some(m) = &imports[i][0] {
                    b = b.import_map(x, y, m.clone());
                }
                if let Some(m) = &imports[i][1] {
                    b = b.import_map(y, x, m.clone());
                }
            }
        }
        out.push(Case { seed, inst: b.build(), failures: failures.clone(), links: edges.len() });
    }
    out
}
