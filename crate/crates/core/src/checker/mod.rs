//! Explicit-state exploration of converged protocol states.

pub mod det;
pub mod failures;
pub mod intern;
pub mod search;
pub mod trail;
pub mod verify;
pub mod visited;

pub use failures::{enumerate_failures, DevicePartition};
pub use intern::{canonical_state_key, RouteEntryTable};
pub use search::{converged_set, Emitted, Reductions, Search, SearchConfig, SearchStats, SourcePrune};
pub use trail::{replay, Trail, TrailEvent};
pub use verify::{verify_group, verify_network, CheckError, CheckerOptions, Network, NetworkReport, Verdict};
pub use visited::VisitedSet;
