//! Small protocol instances with well-known behavior.

use crate::netmodel::{
    ClauseAction, ClauseMatch, LinkId, NodeId, Protocol, ProtocolInstance, RouteMap, RouteMapClause,
    SessionKind,
};

/// Permits everything and sets local-pref.
pub fn local_pref_map(name: &str, lp: u32) -> RouteMap {
    RouteMap::new(
        name,
        vec![RouteMapClause {
            matches: ClauseMatch::default(),
            action: ClauseAction::Permit {
                set_local_pref: Some(lp),
                add_community: vec![],
                delete_community: vec![],
            },
        }],
    )
}

/// Node 0 originates; nodes 1 and 2 each prefer the route through the other.
/// Two stable states.
pub fn disagree() -> ProtocolInstance {
    ProtocolInstance::builder(Protocol::Bgp, "10.0.0.0/8".parse().unwrap(), 3)
        .asn(NodeId(0), 1)
        .asn(NodeId(1), 2)
        .asn(NodeId(2), 3)
        .origin(NodeId(0))
        .session(NodeId(0), NodeId(1), Some(SessionKind::Ebgp), 0, Some(LinkId(0)))
        .session(NodeId(0), NodeId(2), Some(SessionKind::Ebgp), 0, Some(LinkId(1)))
        .session(NodeId(1), NodeId(2), Some(SessionKind::Ebgp), 0, Some(LinkId(2)))
        .import_map(NodeId(1), NodeId(2), local_pref_map("prefer-peer", 200))
        .import_map(NodeId(2), NodeId(1), local_pref_map("prefer-peer", 200))
        .build()
}
