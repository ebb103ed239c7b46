//! Deliberately naive cache implementations used as test oracles. They scan
//! linear lists and share no code with the fast policies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AccessOutcome, Strategy};
use crate::trace::VideoId;

#[derive(Debug, Clone)]
struct Entry {
    video: VideoId,
    count: u64,
    last_used: u64,
}

/// Linear-scan cache for LRU, LFU and RR.
#[derive(Debug, Clone)]
pub struct NaiveCache {
    strategy: Strategy,
    capacity: usize,
    /// Insertion-slot order (RR victims are picked by position here).
    entries: Vec<Entry>,
    clock: u64,
    rng: ChaCha8Rng,
}

impl NaiveCache {
    /// # Panics
    /// On [`Strategy::GeoCollab`], which has no on-demand semantics.
    pub fn new(strategy: Strategy, capacity: usize, seed: u64) -> Self {
        assert!(strategy != Strategy::GeoCollab, "naive cache covers on-demand policies only");
        Self { strategy, capacity, entries: Vec::new(), clock: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn contains(&self, v: VideoId) -> bool {
        self.entries.iter().any(|e| e.video == v)
    }

    pub fn access(&mut self, v: VideoId) -> AccessOutcome {
        self.clock += 1;
        if self.capacity == 0 {
            return AccessOutcome::Miss { evicted: None };
        }
        if let Some(e) = self.entries.iter_mut().find(|e| e.video == v) {
            e.count += 1;
            e.last_used = self.clock;
            return AccessOutcome::Hit;
        }
        let mut evicted = None;
        if self.entries.len() >= self.capacity {
            let victim = match self.strategy {
                Strategy::Lru => {
                    let mut best = 0;
                    for (i, e) in self.entries.iter().enumerate() {
                        if e.last_used < self.entries[best].last_used {
                            best = i;
                        }
                    }
                    best
                }
                Strategy::Lfu => {
                    let mut best = 0;
                    for (i, e) in self.entries.iter().enumerate() {
                        let b = &self.entries[best];
                        if e.count < b.count || (e.count == b.count && e.last_used < b.last_used) {
                            best = i;
                        }
                    }
                    best
                }
                Strategy::Rr => self.rng.random_range(0..self.entries.len()),
                Strategy::GeoCollab => unreachable!(),
            };
            evicted = Some(self.entries.swap_remove(victim).video);
        }
        self.entries.push(Entry { video: v, count: 1, last_used: self.clock });
        AccessOutcome::Miss { evicted }
    }
}
