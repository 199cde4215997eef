//! Route entry interning and canonical state keys.

use crate::netmodel::{LinkId, RouteEntry};
use crate::rpvp::{Best, ProtocolState};
use serde::Serialize;
use std::collections::HashMap;
use xxhash_rust::xxh3::Xxh3;

/// Slot id of a node holding Bottom.
pub const SLOT_BOTTOM: u64 = 0;
/// Slot id of an origin holding Epsilon.
pub const SLOT_EPSILON: u64 = 1;
const FIRST_ENTRY: u64 = 2;
const GROUP_BIT: u64 = 1 << 63;

/// Maps each distinct route entry to a 64-bit id for the lifetime of a search.
/// Multipath selections get ids from a second table with the top bit set.
#[derive(Debug, Default)]
pub struct RouteEntryTable {
    ids: HashMap<RouteEntry, u64>,
    entries: Vec<RouteEntry>,
    groups: HashMap<Vec<u64>, u64>,
    group_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TableStats {
    pub entries: usize,
    pub multipath_groups: usize,
    /// Bytes of the entry payloads held once in the table.
    pub entry_bytes: usize,
}

impl RouteEntryTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, e: &RouteEntry) -> u64 {
        if let Some(id) = self.ids.get(e) {
            return *id;
        }
        let id = FIRST_ENTRY + self.entries.len() as u64;
        assert!(id < GROUP_BIT, "route entry ids exhausted");
        self.entries.push(e.clone());
        self.ids.insert(e.clone(), id);
        id
    }

    pub fn entry(&self, id: u64) -> Option<&RouteEntry> {
        id.checked_sub(FIRST_ENTRY).and_then(|i| self.entries.get(i as usize))
    }

    /// One id for a node's whole selection.
    pub fn slot(&mut self, b: &Best) -> u64 {
        match b {
            Best::Bottom => SLOT_BOTTOM,
            Best::Epsilon => SLOT_EPSILON,
            Best::Routes(rs) if rs.len() == 1 => self.intern(&rs[0]),
            Best::Routes(rs) => {
                let ids: Vec<u64> = rs.iter().map(|r| self.intern(r)).collect();
                if let Some(g) = self.groups.get(&ids) {
                    return *g;
                }
                let g = GROUP_BIT | self.group_count;
                self.group_count += 1;
                self.groups.insert(ids, g);
                g
            }
        }
    }

    pub fn slots(&mut self, s: &ProtocolState) -> Vec<u64> {
        s.best.iter().map(|b| self.slot(b)).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stats(&self) -> TableStats {
        let entry_bytes = self
            .entries
            .iter()
            .map(|e| std::mem::size_of::<RouteEntry>() + e.path.len() * std::mem::size_of::<u32>())
            .sum();
        TableStats { entries: self.entries.len(), multipath_groups: self.groups.len(), entry_bytes }
    }
}

/// 128-bit hash of the slot vector and the failed links.
pub fn key_of_slots(slots: &[u64], failed: &[LinkId]) -> u128 {
    let mut h = Xxh3::new();
    for s in slots {
        h.update(&s.to_le_bytes());
    }
    h.update(&u64::MAX.to_le_bytes());
    for l in failed {
        h.update(&l.0.to_le_bytes());
    }
    h.digest128()
}

pub fn canonical_state_key(state: &ProtocolState, failed: &[LinkId], table: &mut RouteEntryTable) -> u128 {
    key_of_slots(&table.slots(state), failed)
}
