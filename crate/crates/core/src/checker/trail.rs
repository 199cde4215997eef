//! Replayable records of how a violating state was reached.

use super::search::Step;
use crate::fib::ForwardingGraph;
use crate::netmodel::{LinkId, NodeId, Prefix, Protocol, ProtocolInstance, RouteEntry};
use crate::policy::Witness;
use crate::rpvp::{apply_step, Choice, ProtocolState, RpvpError};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    FailLink,
    /// The only move available.
    Select,
    /// One of several moves.
    Branch,
    TakeBottom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrailEvent {
    pub step: usize,
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peer: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix: Option<Prefix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Protocol>,
    /// Routes the node holds after the step.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub entry: Vec<RouteEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub alternatives: Vec<(NodeId, Choice)>,
}

/// The steps of one run inside a trail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunSteps {
    pub prefix: Prefix,
    pub protocol: Protocol,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trail {
    pub policy: String,
    pub group: usize,
    pub pec: usize,
    pub failures: Vec<LinkId>,
    pub witness: Witness,
    pub events: Vec<TrailEvent>,
    /// Forwarding graph of the violating state.
    pub data_plane: ForwardingGraph,
    /// Ids of the dependency outcomes the state was combined with.
    pub dependencies: Vec<String>,
    #[serde(skip)]
    pub runs: Vec<RunSteps>,
}

impl Trail {
    /// Event list: failures first, then each run's steps with the routes
    /// they produced.
    pub fn events_for(
        failures: &[LinkId],
        runs: &[(RunSteps, &ProtocolInstance)],
    ) -> Result<Vec<TrailEvent>, RpvpError> {
        let mut events = Vec::new();
        let blank = |step, kind| TrailEvent {
            step,
            kind,
            node: None,
            peer: None,
            link: None,
            prefix: None,
            protocol: None,
            entry: vec![],
            alternatives: vec![],
        };
        for l in failures {
            let mut e = blank(events.len(), EventKind::FailLink);
            e.link = Some(*l);
            events.push(e);
        }
        for (run, inst) in runs {
            let mut state = ProtocolState::initial(inst);
            for s in &run.steps {
                state = apply_step(inst, &state, s.node, s.choice)?;
                let kind = match s.choice {
                    Choice::TakeBottom => EventKind::TakeBottom,
                    _ if s.alternatives.is_empty() => EventKind::Select,
                    _ => EventKind::Branch,
                };
                let mut e = blank(events.len(), kind);
                e.node = Some(s.node);
                e.peer = match s.choice {
                    Choice::Peer(p) => Some(p),
                    _ => state.get(s.node).primary().and_then(|r| r.head()),
                };
                e.prefix = Some(run.prefix);
                e.protocol = Some(run.protocol);
                e.entry = state.get(s.node).routes().to_vec();
                e.alternatives = s.alternatives.clone();
                events.push(e);
            }
        }
        Ok(events)
    }
}

/// Applies the steps from the initial state.
pub fn replay(inst: &ProtocolInstance, steps: &[Step]) -> Result<ProtocolState, RpvpError> {
    let mut s = ProtocolState::initial(inst);
    for st in steps {
        s = apply_step(inst, &s, st.node, st.choice)?;
    }
    Ok(s)
}
