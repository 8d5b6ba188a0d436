//! Software LRU cache that attributes each eviction to the thread that
//! installed the victim.
//!
//! Not synchronized: callers serialize access with the lock under test.
//! Evicting an entry someone else installed is "other" displacement, the
//! software analogue of one thread's working set pushing another's out of a
//! shared hardware cache.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

pub const DEFAULT_CAPACITY: usize = 10_000;

const NIL: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Hit,
    Miss,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DisplacementStats {
    pub hits: u64,
    pub misses: u64,
    pub self_evictions: u64,
    pub other_evictions: u64,
}

impl DisplacementStats {
    pub fn evictions(&self) -> u64 {
        self.self_evictions + self.other_evictions
    }

    /// Misses over lookups, or 0 with no lookups.
    pub fn miss_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.misses as f64 / total as f64
        }
    }

    /// Lookups that displaced another thread's entry, over all lookups.
    pub fn other_eviction_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.other_evictions as f64 / total as f64
        }
    }

    /// Share of evictions that displaced another thread's entry.
    pub fn other_fraction(&self) -> f64 {
        let e = self.evictions();
        if e == 0 {
            0.0
        } else {
            self.other_evictions as f64 / e as f64
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    key: u64,
    installer: usize,
    prev: usize,
    next: usize,
}

#[derive(Debug, Clone)]
pub struct SoftLruCache {
    capacity: usize,
    index: BTreeMap<u64, usize>,
    slots: Vec<Entry>,
    free: Vec<usize>,
    head: usize,
    tail: usize,
    stats: DisplacementStats,
}

impl Default for SoftLruCache {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}

impl SoftLruCache {
    /// A cache holding at most `capacity` keys (at least one).
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            index: BTreeMap::new(),
            slots: Vec::new(),
            free: Vec::new(),
            head: NIL,
            tail: NIL,
            stats: DisplacementStats::default(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, key: u64) -> bool {
        self.index.contains_key(&key)
    }

    pub fn displacement_stats(&self) -> DisplacementStats {
        self.stats
    }

    /// Keys from most to least recently used.
    pub fn keys_by_recency(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.len());
        let mut cur = self.head;
        while cur != NIL {
            out.push(self.slots[cur].key);
            cur = self.slots[cur].next;
        }
        out
    }

    /// Look `key` up; on a miss install it (the value is the key itself) and
    /// trim from the cold end until within capacity.
    pub fn lookup_or_install(&mut self, key: u64, thread_id: usize) -> Lookup {
        if let Some(&slot) = self.index.get(&key) {
            self.stats.hits += 1;
            self.unlink(slot);
            self.push_head(slot);
            return Lookup::Hit;
        }
        self.stats.misses += 1;
        let entry = Entry { key, installer: thread_id, prev: NIL, next: NIL };
        let slot = match self.free.pop() {
            Some(s) => {
                self.slots[s] = entry;
                s
            }
            None => {
                self.slots.push(entry);
                self.slots.len() - 1
            }
        };
        self.index.insert(key, slot);
        self.push_head(slot);
        while self.index.len() > self.capacity {
            let victim = self.tail;
            self.unlink(victim);
            let Entry { key, installer, .. } = self.slots[victim];
            self.index.remove(&key);
            self.free.push(victim);
            if installer == thread_id {
                self.stats.self_evictions += 1;
            } else {
                self.stats.other_evictions += 1;
            }
        }
        Lookup::Miss
    }

    fn unlink(&mut self, slot: usize) {
        let (prev, next) = (self.slots[slot].prev, self.slots[slot].next);
        if prev == NIL {
            self.head = next;
        } else {
            self.slots[prev].next = next;
        }
        if next == NIL {
            self.tail = prev;
        } else {
            self.slots[next].prev = prev;
        }
    }

    fn push_head(&mut self, slot: usize) {
        self.slots[slot].prev = NIL;
        self.slots[slot].next = self.head;
        if self.head != NIL {
            self.slots[self.head].prev = slot;
        }
        self.head = slot;
        if self.tail == NIL {
            self.tail = slot;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::XorShift64;
    use proptest::prelude::*;

    /// Recency list as a plain vector, most recent first, scanned linearly.
    struct Oracle {
        cap: usize,
        items: Vec<(u64, usize)>,
        selfs: u64,
        others: u64,
    }

    impl Oracle {
        fn access(&mut self, key: u64, t: usize) -> Lookup {
            if let Some(i) = self.items.iter().position(|&(k, _)| k == key) {
                let e = self.items.remove(i);
                self.items.insert(0, e);
                return Lookup::Hit;
            }
            self.items.insert(0, (key, t));
            while self.items.len() > self.cap {
                let (_, owner) = self.items.pop().unwrap();
                if owner == t {
                    self.selfs += 1;
                } else {
                    self.others += 1;
                }
            }
            Lookup::Miss
        }
    }

    #[test]
    fn hand_trace_capacity_two() {
        let mut c = SoftLruCache::new(2);
        let (a, b, cc) = (1, 2, 3);
        assert_eq!(c.lookup_or_install(a, 0), Lookup::Miss);
        assert_eq!(c.lookup_or_install(b, 0), Lookup::Miss);
        assert_eq!(c.lookup_or_install(a, 0), Lookup::Hit);
        assert_eq!(c.lookup_or_install(cc, 0), Lookup::Miss);
        assert!(!c.contains(b));
        assert_eq!(c.keys_by_recency(), vec![cc, a]);
    }

    #[test]
    fn repeated_key_misses_once() {
        let mut c = SoftLruCache::new(4);
        assert_eq!(c.lookup_or_install(9, 0), Lookup::Miss);
        for _ in 0..50 {
            assert_eq!(c.lookup_or_install(9, 0), Lookup::Hit);
        }
        let s = c.displacement_stats();
        assert_eq!((s.hits, s.misses), (50, 1));
    }

    #[test]
    fn fresh_cache_is_zeroed() {
        let c = SoftLruCache::default();
        assert_eq!(c.capacity(), DEFAULT_CAPACITY);
        assert_eq!(c.displacement_stats(), DisplacementStats::default());
        assert_eq!(c.displacement_stats().miss_rate(), 0.0);
    }

    #[test]
    fn single_installer_never_displaces_others() {
        let mut c = SoftLruCache::new(16);
        let mut r = XorShift64::new(5);
        for _ in 0..5000 {
            c.lookup_or_install(r.below(100), 3);
        }
        let s = c.displacement_stats();
        assert_eq!(s.other_evictions, 0);
        assert!(s.self_evictions > 0);
    }

    #[test]
    fn attribution_splits_by_installer() {
        let mut c = SoftLruCache::new(1);
        c.lookup_or_install(1, 0);
        c.lookup_or_install(2, 1); // evicts thread 0's key
        c.lookup_or_install(3, 1); // evicts its own
        let s = c.displacement_stats();
        assert_eq!((s.self_evictions, s.other_evictions), (1, 1));
        assert_eq!(s.other_fraction(), 0.5);
        assert_eq!(s.other_eviction_rate(), 1.0 / 3.0);
    }

    #[test]
    fn matches_recency_scan_oracle() {
        let mut c = SoftLruCache::new(64);
        let mut o = Oracle { cap: 64, items: Vec::new(), selfs: 0, others: 0 };
        let mut r = XorShift64::new(77);
        for _ in 0..10_000 {
            let key = r.below(160);
            let t = r.below(4) as usize;
            assert_eq!(c.lookup_or_install(key, t), o.access(key, t));
        }
        let want: Vec<u64> = o.items.iter().map(|&(k, _)| k).collect();
        assert_eq!(c.keys_by_recency(), want);
        let s = c.displacement_stats();
        assert_eq!((s.self_evictions, s.other_evictions), (o.selfs, o.others));
    }

    proptest! {
        #[test]
        fn conservation_and_capacity(cap in 1usize..32, ops in proptest::collection::vec((0u64..64, 0usize..4), 0..2000)) {
            let mut c = SoftLruCache::new(cap);
            for (k, t) in ops {
                c.lookup_or_install(k, t);
                prop_assert!(c.len() <= cap);
            }
            let s = c.displacement_stats();
            prop_assert_eq!(s.misses, s.evictions() + c.len() as u64);
            prop_assert_eq!(c.keys_by_recency().len(), c.len());
        }
    }
}
