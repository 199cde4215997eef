use super::NodeId;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

pub const DEFAULT_LOCAL_PREF: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Static,
    Bgp,
    Ospf,
}

/// Protocol attributes folded into ranking.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "lowercase")]
pub enum Attrs {
    Ospf {
        cost: u32,
    },
    Bgp {
        local_pref: u32,
        /// AS crossings along owner + path.
        as_path_len: u32,
        /// Learned over an iBGP session.
        ibgp: bool,
        igp_cost: u32,
        /// Sorted, duplicate-free.
        communities: Vec<u32>,
    },
}

/// A candidate route. `path` runs from the next hop to the origin and never
/// contains the owning node; an empty path is the origin's own route.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RouteEntry {
    pub path: Vec<NodeId>,
    pub attrs: Attrs,
}

impl RouteEntry {
    pub fn ospf_origin() -> Self {
        RouteEntry { path: vec![], attrs: Attrs::Ospf { cost: 0 } }
    }

    pub fn bgp_origin() -> Self {
        RouteEntry {
            path: vec![],
            attrs: Attrs::Bgp {
                local_pref: DEFAULT_LOCAL_PREF,
                as_path_len: 0,
                ibgp: false,
                igp_cost: 0,
                communities: vec![],
            },
        }
    }

    pub fn protocol(&self) -> Protocol {
        match self.attrs {
            Attrs::Ospf { .. } => Protocol::Ospf,
            Attrs::Bgp { .. } => Protocol::Bgp,
        }
    }

    pub fn is_epsilon(&self) -> bool {
        self.path.is_empty()
    }

    pub fn head(&self) -> Option<NodeId> {
        self.path.first().copied()
    }

    pub fn rest(&self) -> &[NodeId] {
        if self.path.is_empty() {
            &[]
        } else {
            &self.path[1..]
        }
    }

    pub fn local_pref(&self) -> Option<u32> {
        match &self.attrs {
            Attrs::Bgp { local_pref, .. } => Some(*local_pref),
            Attrs::Ospf { .. } => None,
        }
    }

    pub fn ospf_cost(&self) -> Option<u32> {
        match &self.attrs {
            Attrs::Ospf { cost } => Some(*cost),
            Attrs::Bgp { .. } => None,
        }
    }

    pub fn communities(&self) -> Option<&[u32]> {
        match &self.attrs {
            Attrs::Bgp { communities, .. } => Some(communities),
            Attrs::Ospf { .. } => None,
        }
    }

    pub fn is_loop_free(&self) -> bool {
        let mut seen = self.path.clone();
        seen.sort();
        seen.windows(2).all(|w| w[0] != w[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rank {
    Better,
    Worse,
    EqualRank,
}

/// Lexicographic preference key; smaller is better.
fn key(e: &RouteEntry) -> (u32, u32, u32, u32) {
    match &e.attrs {
        Attrs::Ospf { cost } => (0, *cost, 0, 0),
        Attrs::Bgp { local_pref, as_path_len, ibgp, igp_cost, .. } => {
            (u32::MAX - *local_pref, *as_path_len, *ibgp as u32, *igp_cost)
        }
    }
}

/// Compares `a` against `b` from one node's point of view; `None` is the
/// absent route and ranks below everything.
///
/// OSPF: total cost. BGP: local-pref (high), AS-path length (low), eBGP over
/// iBGP, IGP cost to next hop (low); anything left is a tie.
///
/// Panics when the two entries belong to different protocols.
pub fn rank_compare(a: Option<&RouteEntry>, b: Option<&RouteEntry>) -> Rank {
    match (a, b) {
        (None, None) => Rank::EqualRank,
        (None, Some(_)) => Rank::Worse,
        (Some(_), None) => Rank::Better,
        (Some(a), Some(b)) => {
            assert_eq!(a.protocol(), b.protocol(), "ranking entries of different protocols");
            match key(a).cmp(&key(b)) {
                Ordering::Less => Rank::Better,
                Ordering::Greater => Rank::Worse,
                Ordering::Equal => Rank::EqualRank,
            }
        }
    }
}
