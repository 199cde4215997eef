use super::config::{NetworkConfig, RouteMap, SessionKind};
use super::route::{Attrs, Protocol, RouteEntry, DEFAULT_LOCAL_PREF};
use super::{LinkId, NodeId, Prefix, Topology};
use std::collections::BTreeSet;
use std::sync::Arc;

/// One direction of a peering as seen from its owner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub peer: NodeId,
    /// None for OSPF adjacencies.
    pub kind: Option<SessionKind>,
    /// OSPF link cost, or IGP cost to the peer for iBGP.
    pub cost: u32,
    /// Physical link the session rides on, when it rides on exactly one.
    pub link: Option<LinkId>,
    /// Liveness decided outside the link model (iBGP reachability).
    pub up: bool,
    pub import: Option<Arc<RouteMap>>,
    pub export: Option<Arc<RouteMap>>,
}

/// The compiled view of one protocol for one prefix: who originates it, who
/// peers with whom, and the filters on each session.
#[derive(Debug, Clone)]
pub struct ProtocolInstance {
    pub protocol: Protocol,
    pub prefix: Prefix,
    pub multipath: bool,
    origins: Vec<NodeId>,
    is_origin: Vec<bool>,
    asn: Vec<u32>,
    sessions: Vec<Vec<Session>>,
    live: Vec<Vec<bool>>,
    failed: BTreeSet<LinkId>,
}

impl ProtocolInstance {
    pub fn builder(protocol: Protocol, prefix: Prefix, node_count: usize) -> InstanceBuilder {
        InstanceBuilder {
            inst: ProtocolInstance {
                protocol,
                prefix,
                multipath: false,
                origins: vec![],
                is_origin: vec![false; node_count],
                asn: vec![0; node_count],
                sessions: vec![vec![]; node_count],
                live: vec![vec![]; node_count],
                failed: BTreeSet::new(),
            },
        }
    }

    /// OSPF for `prefix`: adjacencies on links between OSPF speakers,
    /// permit-all filters, cost-based ranking.
    pub fn ospf(topo: &Topology, config: &NetworkConfig, prefix: Prefix, multipath: bool) -> Self {
        let mut b = Self::builder(Protocol::Ospf, prefix, topo.node_count());
        for n in topo.nodes() {
            if config.ospf_originated(topo, n).contains(&prefix) {
                b = b.origin(n);
            }
        }
        let enabled = |n: NodeId, m: NodeId| {
            config
                .node(n)
                .ospf
                .as_ref()
                .map_or(false, |o| o.interfaces.as_ref().map_or(true, |i| i.contains(&m)))
        };
        for (i, l) in topo.links().iter().enumerate() {
            if enabled(l.a, l.b) && enabled(l.b, l.a) {
                b = b.session(l.a, l.b, None, l.cost, Some(LinkId(i as u32)));
            }
        }
        b.multipath(multipath).build()
    }

    /// BGP for `prefix`. `ibgp_cost(a, b)` gives the IGP cost from `a` to
    /// iBGP peer `b`, or None when the session cannot come up.
    pub fn bgp(
        topo: &Topology,
        config: &NetworkConfig,
        prefix: Prefix,
        ibgp_cost: &dyn Fn(NodeId, NodeId) -> Option<u32>,
    ) -> Self {
        let mut b = Self::builder(Protocol::Bgp, prefix, topo.node_count());
        for n in topo.nodes() {
            if let Some(bgp) = &config.node(n).bgp {
                b = b.asn(n, bgp.asn);
                if bgp.originate.contains(&prefix) {
                    b = b.origin(n);
                }
            }
        }
        for n in topo.nodes() {
            let Some(bgp) = &config.node(n).bgp else {
                continue;
            };
            for s in &bgp.sessions {
                let Some(back) = config.node(s.peer).bgp.as_ref().and_then(|p| p.session_to(n)) else {
                    continue;
                };
                let (cost, link, up) = match s.kind {
                    SessionKind::Ebgp => match topo.link_between(n, s.peer) {
                        Some(l) => (0, Some(l), true),
                        None => (0, None, false),
                    },
                    SessionKind::Ibgp => {
                        let loopbacks =
                            topo.node(n).loopback.is_some() && topo.node(s.peer).loopback.is_some();
                        match (loopbacks, topo.link_between(n, s.peer)) {
                            (false, Some(l)) => (topo.link(l).cost, Some(l), true),
                            _ => match ibgp_cost(n, s.peer) {
                                Some(c) => (c, None, true),
                                None => (0, None, false),
                            },
                        }
                    }
                };
                b.push_directed(
                    n,
                    Session {
                        peer: s.peer,
                        kind: Some(s.kind),
                        cost,
                        link,
                        up: up && back.kind == s.kind,
                        import: s.import.clone(),
                        export: s.export.clone(),
                    },
                );
            }
        }
        b.build()
    }

    pub fn node_count(&self) -> usize {
        self.is_origin.len()
    }

    pub fn origins(&self) -> &[NodeId] {
        &self.origins
    }

    pub fn is_origin(&self, n: NodeId) -> bool {
        self.is_origin[n.index()]
    }

    pub fn asn(&self, n: NodeId) -> u32 {
        self.asn[n.index()]
    }

    pub fn failed_links(&self) -> &BTreeSet<LinkId> {
        &self.failed
    }

    /// Copy of this instance with `failed` links down.
    pub fn with_failures(&self, failed: &[LinkId]) -> Self {
        let mut out = self.clone();
        out.failed = failed.iter().copied().collect();
        out.recompute_live();
        out
    }

    fn recompute_live(&mut self) {
        self.live = self
            .sessions
            .iter()
            .map(|ss| ss.iter().map(|s| s.up && s.link.map_or(true, |l| !self.failed.contains(&l))).collect())
            .collect();
    }

    /// All configured sessions of `n`, live or not, sorted by peer.
    pub fn all_sessions(&self, n: NodeId) -> &[Session] {
        &self.sessions[n.index()]
    }

    /// Live sessions of `n`, sorted by peer.
    pub fn peers(&self, n: NodeId) -> impl Iterator<Item = &Session> + '_ {
        self.sessions[n.index()].iter().zip(&self.live[n.index()]).filter(|(_, l)| **l).map(|(s, _)| s)
    }

    pub fn session(&self, n: NodeId, peer: NodeId) -> Option<&Session> {
        let ss = &self.sessions[n.index()];
        ss.binary_search_by_key(&peer, |s| s.peer).ok().map(|i| &ss[i])
    }

    pub fn session_live(&self, n: NodeId, peer: NodeId) -> bool {
        let ss = &self.sessions[n.index()];
        ss.binary_search_by_key(&peer, |s| s.peer).map_or(false, |i| self.live[n.index()][i])
    }

    pub fn origin_entry(&self) -> RouteEntry {
        match self.protocol {
            Protocol::Bgp => RouteEntry::bgp_origin(),
            _ => RouteEntry::ospf_origin(),
        }
    }

    /// Export of `sender`'s best `entry` towards `receiver`: prepends the
    /// sender and applies the export map. None when rejected.
    pub fn apply_export(&self, sender: NodeId, receiver: NodeId, entry: &RouteEntry) -> Option<RouteEntry> {
        let sess = self.session(sender, receiver)?;
        let mut out = entry.clone();
        out.path.insert(0, sender);
        if let Attrs::Bgp { local_pref, ibgp, .. } = &mut out.attrs {
            match sess.kind {
                // learned over iBGP, never re-advertised to iBGP peers
                Some(SessionKind::Ibgp) if *ibgp => return None,
                Some(SessionKind::Ebgp) => *local_pref = DEFAULT_LOCAL_PREF,
                _ => {}
            }
        }
        match &sess.export {
            Some(map) => map.apply(&self.prefix, out),
            None => Some(out),
        }
    }

    /// Import at `receiver` of an advertisement from `sender`. Rejects
    /// looping paths; never changes the path.
    pub fn apply_import(&self, receiver: NodeId, sender: NodeId, entry: RouteEntry) -> Option<RouteEntry> {
        if entry.path.contains(&receiver) {
            return None;
        }
        let sess = self.session(receiver, sender)?;
        let mut out = entry;
        let as_len = self.as_path_len(receiver, &out.path);
        match &mut out.attrs {
            Attrs::Ospf { cost } => *cost += sess.cost,
            Attrs::Bgp { as_path_len, ibgp, igp_cost, .. } => {
                *as_path_len = as_len;
                *ibgp = sess.kind == Some(SessionKind::Ibgp);
                *igp_cost = if *ibgp { sess.cost } else { 0 };
            }
        }
        match &sess.import {
            Some(map) => map.apply(&self.prefix, out),
            None => Some(out),
        }
    }

    /// import(receiver, sender)(export(sender, receiver)(best)).
    pub fn offer(&self, receiver: NodeId, sender: NodeId, sender_best: &RouteEntry) -> Option<RouteEntry> {
        let exported = self.apply_export(sender, receiver, sender_best)?;
        self.apply_import(receiver, sender, exported)
    }

    /// Number of AS changes walking owner, path[0], path[1], ...
    pub fn as_path_len(&self, owner: NodeId, path: &[NodeId]) -> u32 {
        let mut prev = self.asn(owner);
        let mut n = 0;
        for p in path {
            let a = self.asn(*p);
            if a != prev {
                n += 1;
            }
            prev = a;
        }
        n
    }
}

pub struct InstanceBuilder {
    inst: ProtocolInstance,
}

impl InstanceBuilder {
    pub fn origin(mut self, n: NodeId) -> Self {
        if !self.inst.is_origin[n.index()] {
            self.inst.is_origin[n.index()] = true;
            self.inst.origins.push(n);
            self.inst.origins.sort();
        }
        self
    }

    pub fn asn(mut self, n: NodeId, asn: u32) -> Self {
        self.inst.asn[n.index()] = asn;
        self
    }

    pub fn multipath(mut self, on: bool) -> Self {
        self.inst.multipath = on;
        self
    }

    /// Adds a session in both directions without filters.
    pub fn session(
        mut self,
        a: NodeId,
        b: NodeId,
        kind: Option<SessionKind>,
        cost: u32,
        link: Option<LinkId>,
    ) -> Self {
        for (x, y) in [(a, b), (b, a)] {
            self.push_directed(
                x,
                Session { peer: y, kind, cost, link, up: true, import: None, export: None },
            );
        }
        self
    }

    pub fn import_map(mut self, n: NodeId, peer: NodeId, map: RouteMap) -> Self {
        self.session_mut(n, peer).import = Some(Arc::new(map));
        self
    }

    pub fn export_map(mut self, n: NodeId, peer: NodeId, map: RouteMap) -> Self {
        self.session_mut(n, peer).export = Some(Arc::new(map));
        self
    }

    fn session_mut(&mut self, n: NodeId, peer: NodeId) -> &mut Session {
        self.inst.sessions[n.index()].iter_mut().find(|s| s.peer == peer).expect("no such session")
    }

    fn push_directed(&mut self, n: NodeId, s: Session) {
        let ss = &mut self.inst.sessions[n.index()];
        match ss.binary_search_by_key(&s.peer, |x| x.peer) {
            Ok(i) => ss[i] = s,
            Err(i) => ss.insert(i, s),
        }
    }

    pub fn build(mut self) -> ProtocolInstance {
        self.inst.recompute_live();
        self.inst
    }
}

#[cfg(test)]
mod tests {
    use super::super::config::{ClauseAction, ClauseMatch, RouteMapClause};
    use super::*;

    const A: NodeId = NodeId(0);
    const B: NodeId = NodeId(1);
    const O: NodeId = NodeId(2);

    fn bgp_line() -> InstanceBuilder {
        ProtocolInstance::builder(Protocol::Bgp, "10.0.0.0/8".parse().unwrap(), 3)
            .asn(A, 1)
            .asn(B, 2)
            .asn(O, 3)
            .origin(O)
            .session(A, B, Some(SessionKind::Ebgp), 0, None)
            .session(B, O, Some(SessionKind::Ebgp), 0, None)
    }

    fn at_b() -> RouteEntry {
        // B's best [O] re-exported: [B, O]
        let inst = bgp_line().build();
        let b_best = inst.offer(B, O, &inst.origin_entry()).unwrap();
        inst.apply_export(B, A, &b_best).unwrap()
    }

    #[test]
    fn import_rejects_loops() {
        let inst = bgp_line().build();
        let e = RouteEntry { path: vec![B, A], ..RouteEntry::bgp_origin() };
        assert_eq!(inst.apply_import(A, B, e), None);
    }

    #[test]
    fn empty_import_is_identity_on_path() {
        let inst = bgp_line().build();
        let e = at_b();
        let got = inst.apply_import(A, B, e.clone()).unwrap();
        assert_eq!(got.path, e.path);
        assert_eq!(got.local_pref(), Some(100));
    }

    #[test]
    fn community_sets_local_pref() {
        let tag = RouteMap::new(
            "tag",
            vec![RouteMapClause {
                matches: ClauseMatch::default(),
                action: ClauseAction::Permit {
                    set_local_pref: None,
                    add_community: vec![1],
                    delete_community: vec![],
                },
            }],
        );
        let lp = RouteMap::new(
            "lp",
            vec![
                RouteMapClause {
                    matches: ClauseMatch { community: Some(1), ..Default::default() },
                    action: ClauseAction::Permit {
                        set_local_pref: Some(200),
                        add_community: vec![],
                        delete_community: vec![],
                    },
                },
                RouteMapClause { matches: ClauseMatch::default(), action: ClauseAction::permit() },
            ],
        );
        let inst = bgp_line().export_map(B, A, tag).import_map(A, B, lp).build();
        let b_best = inst.offer(B, O, &inst.origin_entry()).unwrap();
        let got = inst.offer(A, B, &b_best).unwrap();
        assert_eq!(got.path, vec![B, O]);
        assert_eq!(got.local_pref(), Some(200));
    }

    #[test]
    fn export_prepends() {
        let inst = bgp_line().build();
        let e = inst.apply_export(O, B, &inst.origin_entry()).unwrap();
        assert_eq!(e.path, vec![O]);
        assert_eq!(at_b().path, vec![B, O]);
        let deny = bgp_line().export_map(O, B, RouteMap::deny_all("d")).build();
        assert_eq!(deny.apply_export(O, B, &deny.origin_entry()), None);
    }

    #[test]
    fn ibgp_not_readvertised_to_ibgp() {
        let inst = ProtocolInstance::builder(Protocol::Bgp, "10.0.0.0/8".parse().unwrap(), 3)
            .asn(A, 1)
            .asn(B, 1)
            .asn(O, 1)
            .origin(O)
            .session(A, B, Some(SessionKind::Ibgp), 1, None)
            .session(B, O, Some(SessionKind::Ibgp), 1, None)
            .build();
        let b_best = inst.offer(B, O, &inst.origin_entry()).unwrap();
        assert_eq!(inst.apply_export(B, A, &b_best), None);
    }

    #[test]
    fn as_path_counts_crossings() {
        let inst = bgp_line().build();
        assert_eq!(inst.as_path_len(A, &[B, O]), 2);
        assert_eq!(inst.as_path_len(A, &[]), 0);
    }

    #[test]
    fn failures_remove_sessions() {
        let inst = bgp_line().build();
        let inst2 = ProtocolInstance::builder(Protocol::Ospf, inst.prefix, 2)
            .session(A, B, None, 4, Some(LinkId(0)))
            .build();
        assert_eq!(inst2.peers(A).count(), 1);
        assert_eq!(inst2.with_failures(&[LinkId(0)]).peers(A).count(), 0);
    }

    proptest::proptest! {
        #[test]
        fn import_never_changes_path(lp in 0u32..500, comm in proptest::option::of(0u32..4), deny in proptest::bool::ANY) {
            let action = if deny { ClauseAction::Deny } else {
                ClauseAction::Permit { set_local_pref: Some(lp), add_community: vec![3], delete_community: vec![1] }
            };
            let map = RouteMap::new("r", vec![RouteMapClause { matches: ClauseMatch { community: comm, ..Default::default() }, action }]);
            let inst = bgp_line().import_map(A, B, map).build();
            let e = at_b();
            if let Some(got) = inst.apply_import(A, B, e.clone()) {
                proptest::prop_assert_eq!(&got.path, &e.path);
            }
            // purity
            proptest::prop_assert_eq!(inst.apply_import(A, B, e.clone()), inst.apply_import(A, B, e));
        }

        #[test]
        fn export_adds_exactly_the_sender(len in 0usize..3) {
            let inst = bgp_line().build();
            let path: Vec<NodeId> = [O, NodeId(5), NodeId(6)][..len].to_vec();
            let e = RouteEntry { path: path.clone(), ..RouteEntry::bgp_origin() };
            let out = inst.apply_export(B, A, &e).unwrap();
            proptest::prop_assert_eq!(out.path.len(), path.len() + 1);
            proptest::prop_assert_eq!(out.path[0], B);
        }
    }
}
