//! Sets of explored state keys: exact, or a Bloom filter that may wrongly
//! report a new state as seen and so skip part of the space.

use std::collections::HashSet;
use std::hash::{BuildHasherDefault, Hasher};

/// Keys are already uniform hashes; fold them instead of rehashing.
#[derive(Default)]
pub struct FoldHasher(u64);

impl Hasher for FoldHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 = self.0.rotate_left(8) ^ u64::from(*b);
        }
    }

    fn write_u128(&mut self, k: u128) {
        self.0 = (k as u64) ^ ((k >> 64) as u64);
    }
}

pub type KeySet = HashSet<u128, BuildHasherDefault<FoldHasher>>;

#[derive(Debug, Clone)]
pub struct Bloom {
    bits: Vec<u64>,
    nbits: u64,
    hashes: u32,
}

impl Bloom {
    pub fn new(nbits: u64, hashes: u32) -> Self {
        assert!(nbits >= 64 && hashes >= 1);
        let words = nbits.div_ceil(64) as usize;
        Bloom { bits: vec![0; words], nbits: words as u64 * 64, hashes }
    }

    /// Sets the key's bits; true if at least one was clear.
    pub fn insert(&mut self, key: u128) -> bool {
        let h1 = key as u64;
        let h2 = ((key >> 64) as u64) | 1;
        let mut fresh = false;
        for i in 0..self.hashes as u64 {
            let bit = h1.wrapping_add(i.wrapping_mul(h2)) % self.nbits;
            let (w, m) = ((bit / 64) as usize, 1u64 << (bit % 64));
            if self.bits[w] & m == 0 {
                fresh = true;
                self.bits[w] |= m;
            }
        }
        fresh
    }

    pub fn bits(&self) -> u64 {
        self.nbits
    }

    pub fn bytes(&self) -> usize {
        self.bits.len() * 8
    }
}

#[derive(Debug, Clone)]
pub enum VisitedSet {
    Exact(KeySet),
    Bitstate(Bloom),
}

impl VisitedSet {
    pub fn exact() -> Self {
        VisitedSet::Exact(KeySet::default())
    }

    pub fn bitstate(nbits: u64, hashes: u32) -> Self {
        VisitedSet::Bitstate(Bloom::new(nbits, hashes))
    }

    /// True if the key was not seen before.
    pub fn insert(&mut self, key: u128) -> bool {
        match self {
            VisitedSet::Exact(s) => s.insert(key),
            VisitedSet::Bitstate(b) => b.insert(key),
        }
    }

    /// Approximate memory held for keys.
    pub fn bytes(&self) -> usize {
        match self {
            VisitedSet::Exact(s) => s.capacity() * (std::mem::size_of::<u128>() + 1),
            VisitedSet::Bitstate(b) => b.bytes(),
        }
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            VisitedSet::Exact(s) => Some(s.len()),
            VisitedSet::Bitstate(_) => None,
        }
    }
}
