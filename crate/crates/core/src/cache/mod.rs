//! Per-node cache state with LRU, LFU, random replacement and plan-driven
//! (geo-collaborative) policies.

mod geocollab;
pub mod reference;

pub use geocollab::{
    local_popularity_update, multi_location_scores, plan_cache, update_rank, GeoCollabConfig, GeoCollabState,
    PopularityScope, UserShare, WindowStats,
};

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::VideoId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Lru,
    Lfu,
    Rr,
    #[serde(rename = "geocollab")]
    GeoCollab,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Lru, Strategy::Lfu, Strategy::Rr, Strategy::GeoCollab];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Lru => "lru",
            Strategy::Lfu => "lfu",
            Strategy::Rr => "rr",
            Strategy::GeoCollab => "geocollab",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lru" => Ok(Strategy::Lru),
            "lfu" => Ok(Strategy::Lfu),
            "rr" => Ok(Strategy::Rr),
            "geocollab" => Ok(Strategy::GeoCollab),
            other => Err(Error::InvalidConfig(format!("unknown strategy '{other}' (expected lru, lfu, rr, geocollab)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessOutcome {
    Hit,
    Miss { evicted: Option<VideoId> },
}

impl AccessOutcome {
    pub fn is_hit(self) -> bool {
        matches!(self, AccessOutcome::Hit)
    }
}

const NIL: usize = usize::MAX;

#[derive(Debug, Clone)]
struct LruNode {
    video: VideoId,
    prev: usize,
    next: usize,
}

/// O(1) LRU: a slab-backed doubly linked list (head = most recent) plus a
/// position map.
#[derive(Debug, Clone, Default)]
struct Lru {
    map: HashMap<VideoId, usize>,
    nodes: Vec<LruNode>,
    free: Vec<usize>,
    head: usize,
    tail: usize,
}

impl Lru {
    fn new() -> Self {
        Self { head: NIL, tail: NIL, ..Self::default() }
    }

    fn len(&self) -> usize {
        self.map.len()
    }

    fn unlink(&mut self, i: usize) {
        let (prev, next) = (self.nodes[i].prev, self.nodes[i].next);
        if prev == NIL {
            self.head = next;
        } else {
            self.nodes[prev].next = next;
        }
        if next == NIL {
            self.tail = prev;
        } else {
            self.nodes[next].prev = prev;
        }
    }

    fn push_front(&mut self, i: usize) {
        self.nodes[i].prev = NIL;
        self.nodes[i].next = self.head;
        if self.head != NIL {
            self.nodes[self.head].prev = i;
        }
        self.head = i;
        if self.tail == NIL {
            self.tail = i;
        }
    }

    fn touch(&mut self, v: VideoId) -> bool {
        match self.map.get(&v) {
            Some(&i) => {
                if self.head != i {
                    self.unlink(i);
                    self.push_front(i);
                }
                true
            }
            None => false,
        }
    }

    fn insert_front(&mut self, v: VideoId) {
        let node = LruNode { video: v, prev: NIL, next: NIL };
        let i = match self.free.pop() {
            Some(i) => {
                self.nodes[i] = node;
                i
            }
            None => {
                self.nodes.push(node);
                self.nodes.len() - 1
            }
        };
        self.map.insert(v, i);
        self.push_front(i);
    }

    fn pop_back(&mut self) -> Option<VideoId> {
        if self.tail == NIL {
            return None;
        }
        let i = self.tail;
        self.unlink(i);
        self.free.push(i);
        let v = self.nodes[i].video;
        self.map.remove(&v);
        Some(v)
    }

    fn clear(&mut self) {
        *self = Self::new();
    }
}

/// In-cache LFU: counts start at 1 on insertion and are dropped on eviction.
/// Victim = minimum count, least recently accessed among equals.
#[derive(Debug, Clone, Default)]
struct Lfu {
    meta: HashMap<VideoId, (u64, u64)>,
    order: BTreeSet<(u64, u64, VideoId)>,
    tick: u64,
}

impl Lfu {
    fn touch(&mut self, v: VideoId) -> bool {
        self.tick += 1;
        match self.meta.get_mut(&v) {
            Some(m) => {
                self.order.remove(&(m.0, m.1, v));
                m.0 += 1;
                m.1 = self.tick;
                self.order.insert((m.0, m.1, v));
                true
            }
            None => false,
        }
    }

    fn insert(&mut self, v: VideoId) {
        self.meta.insert(v, (1, self.tick));
        self.order.insert((1, self.tick, v));
    }

    fn evict(&mut self) -> Option<VideoId> {
        let (_, _, v) = self.order.pop_first()?;
        self.meta.remove(&v);
        Some(v)
    }
}

/// Random replacement: the victim sits at a uniformly drawn slot of the
/// insertion-ordered item vector, removed by swap-remove.
#[derive(Debug, Clone)]
struct Random {
    items: Vec<VideoId>,
    pos: HashMap<VideoId, usize>,
    rng: ChaCha8Rng,
}

impl Random {
    fn evict(&mut self) -> Option<VideoId> {
        if self.items.is_empty() {
            return None;
        }
        let i = self.rng.random_range(0..self.items.len());
        let v = self.items.swap_remove(i);
        self.pos.remove(&v);
        if i < self.items.len() {
            self.pos.insert(self.items[i], i);
        }
        Some(v)
    }

    fn insert(&mut self, v: VideoId) {
        self.pos.insert(v, self.items.len());
        self.items.push(v);
    }
}

#[derive(Debug, Clone)]
enum Policy {
    Lru(Lru),
    Lfu(Lfu),
    Rr(Random),
    /// Contents come from installed plans; recency kept for optional
    /// online fill.
    Planned { lru: Lru, online_fill: bool },
}

/// One node's cache.
#[derive(Debug, Clone)]
pub struct CacheState {
    capacity: usize,
    strategy: Strategy,
    policy: Policy,
}

impl CacheState {
    /// `seed` drives random replacement; other policies ignore it.
    pub fn new(strategy: Strategy, capacity: usize, seed: u64) -> Self {
        let policy = match strategy {
            Strategy::Lru => Policy::Lru(Lru::new()),
            Strategy::Lfu => Policy::Lfu(Lfu::default()),
            Strategy::Rr => Policy::Rr(Random { items: Vec::new(), pos: HashMap::new(), rng: ChaCha8Rng::seed_from_u64(seed) }),
            Strategy::GeoCollab => Policy::Planned { lru: Lru::new(), online_fill: false },
        };
        Self { capacity, strategy, policy }
    }

    /// Lets plan-driven caches insert on miss (LRU eviction) between plans.
    pub fn with_online_fill(mut self, on: bool) -> Self {
        self.set_online_fill(on);
        self
    }

    pub fn set_online_fill(&mut self, on: bool) {
        if let Policy::Planned { online_fill, .. } = &mut self.policy {
            *online_fill = on;
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        match &self.policy {
            Policy::Lru(l) | Policy::Planned { lru: l, .. } => l.len(),
            Policy::Lfu(l) => l.meta.len(),
            Policy::Rr(r) => r.items.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, v: VideoId) -> bool {
        match &self.policy {
            Policy::Lru(l) | Policy::Planned { lru: l, .. } => l.map.contains_key(&v),
            Policy::Lfu(l) => l.meta.contains_key(&v),
            Policy::Rr(r) => r.pos.contains_key(&v),
        }
    }

    /// Cached videos in ascending id order.
    pub fn contents(&self) -> Vec<VideoId> {
        let mut out: Vec<VideoId> = match &self.policy {
            Policy::Lru(l) | Policy::Planned { lru: l, .. } => l.map.keys().copied().collect(),
            Policy::Lfu(l) => l.meta.keys().copied().collect(),
            Policy::Rr(r) => r.items.clone(),
        };
        out.sort_unstable();
        out
    }

    pub fn access(&mut self, v: VideoId) -> AccessOutcome {
        if self.capacity == 0 {
            return AccessOutcome::Miss { evicted: None };
        }
        let cap = self.capacity;
        match &mut self.policy {
            Policy::Lru(l) => {
                if l.touch(v) {
                    return AccessOutcome::Hit;
                }
                let evicted = if l.len() >= cap { l.pop_back() } else { None };
                l.insert_front(v);
                AccessOutcome::Miss { evicted }
            }
            Policy::Lfu(l) => {
                if l.touch(v) {
                    return AccessOutcome::Hit;
                }
                let evicted = if l.meta.len() >= cap { l.evict() } else { None };
                l.insert(v);
                AccessOutcome::Miss { evicted }
            }
            Policy::Rr(r) => {
                if r.pos.contains_key(&v) {
                    return AccessOutcome::Hit;
                }
                let evicted = if r.items.len() >= cap { r.evict() } else { None };
                r.insert(v);
                AccessOutcome::Miss { evicted }
            }
            Policy::Planned { lru, online_fill } => {
                if lru.touch(v) {
                    return AccessOutcome::Hit;
                }
                if !*online_fill {
                    return AccessOutcome::Miss { evicted: None };
                }
                let evicted = if lru.len() >= cap { lru.pop_back() } else { None };
                lru.insert_front(v);
                AccessOutcome::Miss { evicted }
            }
        }
    }

    /// Replaces the contents of a plan-driven cache. `plan` is in priority
    /// order; at most `capacity` entries are kept. Other policies reject
    /// plans.
    pub fn install_plan(&mut self, plan: &[VideoId]) -> Result<()> {
        let cap = self.capacity;
        match &mut self.policy {
            Policy::Planned { lru, .. } => {
                lru.clear();
                // Highest priority ends up most recent.
                for &v in plan.iter().take(cap).rev() {
                    if !lru.map.contains_key(&v) {
                        lru.insert_front(v);
                    }
                }
                Ok(())
            }
            _ => Err(Error::InvalidConfig(format!("{} caches do not accept plans", self.strategy))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(strategy: Strategy, cap: usize, seq: &[u32]) -> Vec<AccessOutcome> {
        let mut c = CacheState::new(strategy, cap, 1);
        seq.iter().map(|&v| c.access(VideoId(v))).collect()
    }

    fn miss(e: Option<u32>) -> AccessOutcome {
        AccessOutcome::Miss { evicted: e.map(VideoId) }
    }

    #[test]
    fn lru_example() {
        // A B C A with capacity 2.
        assert_eq!(run(Strategy::Lru, 2, &[0, 1, 2, 0]), vec![miss(None), miss(None), miss(Some(0)), miss(Some(1))]);
    }

    #[test]
    fn lfu_example() {
        // A A B C B with capacity 2.
        assert_eq!(
            run(Strategy::Lfu, 2, &[0, 0, 1, 2, 1]),
            vec![miss(None), AccessOutcome::Hit, miss(None), miss(Some(1)), miss(Some(2))]
        );
    }

    #[test]
    fn zero_capacity_never_caches() {
        for s in Strategy::ALL {
            let out = run(s, 0, &[1, 1, 1]);
            assert!(out.iter().all(|o| *o == miss(None)));
        }
    }

    #[test]
    fn big_cache_only_compulsory_misses() {
        for s in [Strategy::Lru, Strategy::Lfu, Strategy::Rr] {
            let out = run(s, 10, &[1, 2, 1, 3, 2, 1]);
            let hits = out.iter().filter(|o| o.is_hit()).count();
            assert_eq!(hits, 3);
        }
    }

    #[test]
    fn planned_cache_serves_plan_only() {
        let mut c = CacheState::new(Strategy::GeoCollab, 2, 0);
        c.install_plan(&[VideoId(5), VideoId(6), VideoId(7)]).unwrap();
        assert_eq!(c.contents(), vec![VideoId(5), VideoId(6)]);
        assert!(c.access(VideoId(5)).is_hit());
        assert_eq!(c.access(VideoId(9)), miss(None));
        assert!(!c.contains(VideoId(9)));
        let mut filled = CacheState::new(Strategy::GeoCollab, 2, 0).with_online_fill(true);
        filled.install_plan(&[VideoId(5), VideoId(6)]).unwrap();
        filled.access(VideoId(5));
        assert_eq!(filled.access(VideoId(9)), miss(Some(6)));
        assert!(CacheState::new(Strategy::Lru, 2, 0).install_plan(&[]).is_err());
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("GeoCollab".parse::<Strategy>().unwrap(), Strategy::GeoCollab);
        assert!("fifo".parse::<Strategy>().is_err());
        assert_eq!(serde_json::to_string(&Strategy::GeoCollab).unwrap(), "\"geocollab\"");
    }
}
