use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{DayClock, Trace, UserId};
use crate::geo::{haversine, CellId, CellPoiMap, PoiLabel};
use crate::stats::Ecdf;

/// Where a request was served from: an infrastructure node (by index) or,
/// when no node was in range, its grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LocationKey {
    Node(u32),
    Cell(CellId),
}

impl LocationKey {
    /// Per-record cell assignment.
    pub fn cells(trace: &Trace) -> Vec<LocationKey> {
        trace.records.iter().map(|r| LocationKey::Cell(CellId::of(r.position))).collect()
    }
}

pub type UserDayKey = (UserId, i64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DayClass {
    SingleLocation,
    MultiLocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserDayClass {
    pub user: UserId,
    pub day: i64,
    pub class: DayClass,
    pub locations_visited: usize,
}

/// Groups record indices by (user, local day), each group in time order.
pub fn user_day_groups(trace: &Trace, clock: DayClock) -> BTreeMap<UserDayKey, Vec<usize>> {
    let mut groups: BTreeMap<UserDayKey, Vec<usize>> = BTreeMap::new();
    for (i, r) in trace.records.iter().enumerate() {
        groups.entry((r.user, clock.day(r.timestamp))).or_default().push(i);
    }
    groups
}

/// Classifies every (user, day) by the number of distinct locations the
/// user's requests were served from that day.
pub fn classify_users(trace: &Trace, assignment: &[LocationKey], clock: DayClock) -> Vec<UserDayClass> {
    assert_eq!(assignment.len(), trace.len(), "one location per record");
    user_day_groups(trace, clock)
        .into_iter()
        .map(|((user, day), idx)| {
            let distinct: BTreeSet<LocationKey> = idx.iter().map(|&i| assignment[i]).collect();
            let n = distinct.len();
            UserDayClass {
                user,
                day,
                class: if n >= 2 { DayClass::MultiLocation } else { DayClass::SingleLocation },
                locations_visited: n,
            }
        })
        .collect()
}

/// Users whose request count reaches `threshold` on every day they appear.
pub fn active_users(trace: &Trace, clock: DayClock, threshold: usize) -> BTreeSet<UserId> {
    let mut per_day: HashMap<UserDayKey, usize> = HashMap::new();
    for r in &trace.records {
        *per_day.entry((r.user, clock.day(r.timestamp))).or_insert(0) += 1;
    }
    let mut ok: BTreeMap<UserId, bool> = BTreeMap::new();
    for ((user, _), n) in per_day {
        let e = ok.entry(user).or_insert(true);
        *e &= n >= threshold;
    }
    ok.into_iter().filter_map(|(u, keep)| keep.then_some(u)).collect()
}

/// Labels locations by first appearance (A, B, C, ...) and collapses
/// consecutive repeats, e.g. `[x, x, y, x]` → `"ABA"`.
pub fn canonical_pattern<T: PartialEq + Copy>(visits: &[T]) -> String {
    let mut seen: Vec<T> = Vec::new();
    let mut out = String::new();
    let mut last: Option<T> = None;
    for &v in visits {
        if last == Some(v) {
            continue;
        }
        last = Some(v);
        let idx = match seen.iter().position(|&s| s == v) {
            Some(i) => i,
            None => {
                seen.push(v);
                seen.len() - 1
            }
        };
        out.push(pattern_letter(idx));
    }
    out
}

fn pattern_letter(i: usize) -> char {
    if i < 26 {
        (b'A' + i as u8) as char
    } else {
        '*'
    }
}

/// Human-readable name of a canonical visit string.
pub fn describe_pattern(pattern: &str) -> String {
    let distinct: BTreeSet<char> = pattern.chars().collect();
    let k = distinct.len();
    let len = pattern.chars().count();
    let closed = len > 1 && pattern.chars().next() == pattern.chars().last();
    match (k, len) {
        (1, _) => "single location".into(),
        (2, 2) => "2-location one-way".into(),
        (2, 3) => "2-location round trip".into(),
        (2, _) => "2-location alternation".into(),
        (k, _) if closed => format!("{k}-location tour"),
        (k, _) => format!("{k}-location path"),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MobilityStats {
    /// Movements per multi-location user-day → fraction of such user-days.
    pub movements_per_user: BTreeMap<usize, f64>,
    /// Distinct locations per multi-location user-day → fraction.
    pub locations_per_user: BTreeMap<usize, f64>,
    /// Movement distances (m), keyed by interval bucket `[0,10)`, `[10,60)`, `[60,inf)` minutes.
    pub consecutive_distance_cdf: BTreeMap<String, Ecdf>,
    /// Movement intervals (min), keyed by speed bucket `<5.6`, `[5.6,40)`, `>=40` km/h.
    pub consecutive_interval_cdf: BTreeMap<String, Ecdf>,
    /// Canonical visit string → fraction of multi-location user-days.
    pub migration_pattern_fractions: BTreeMap<String, f64>,
    pub user_days: usize,
    pub multi_location_user_days: usize,
    pub movements: usize,
}

pub const INTERVAL_BUCKETS: [&str; 3] = ["[0,10)", "[10,60)", "[60,inf)"];
pub const SPEED_BUCKETS: [&str; 3] = ["<5.6", "[5.6,40)", ">=40"];

fn interval_bucket(minutes: f64) -> &'static str {
    if minutes < 10.0 {
        INTERVAL_BUCKETS[0]
    } else if minutes < 60.0 {
        INTERVAL_BUCKETS[1]
    } else {
        INTERVAL_BUCKETS[2]
    }
}

fn speed_bucket(kmh: f64) -> &'static str {
    if kmh < 5.6 {
        SPEED_BUCKETS[0]
    } else if kmh < 40.0 {
        SPEED_BUCKETS[1]
    } else {
        SPEED_BUCKETS[2]
    }
}

fn normalize_hist(counts: BTreeMap<usize, usize>) -> BTreeMap<usize, f64> {
    let total: usize = counts.values().sum();
    counts.into_iter().map(|(k, v)| (k, v as f64 / total.max(1) as f64)).collect()
}

/// Movement statistics. A movement is a pair of consecutive requests within
/// one user-day served at distinct locations.
pub fn movement_stats(trace: &Trace, assignment: &[LocationKey], clock: DayClock) -> MobilityStats {
    assert_eq!(assignment.len(), trace.len(), "one location per record");
    let mut movements_hist: BTreeMap<usize, usize> = BTreeMap::new();
    let mut locations_hist: BTreeMap<usize, usize> = BTreeMap::new();
    let mut patterns: BTreeMap<String, usize> = BTreeMap::new();
    let mut dist: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut interval: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut stats = MobilityStats::default();

    for idx in user_day_groups(trace, clock).into_values() {
        stats.user_days += 1;
        let mut moves = 0;
        for pair in idx.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if assignment[a] == assignment[b] {
                continue;
            }
            moves += 1;
            let (ra, rb) = (&trace.records[a], &trace.records[b]);
            let d = haversine(ra.position, rb.position);
            let minutes = (rb.timestamp - ra.timestamp) as f64 / 60.0;
            let kmh = if minutes > 0.0 { d / 1000.0 / (minutes / 60.0) } else { f64::INFINITY };
            dist.entry(interval_bucket(minutes)).or_default().push(d);
            interval.entry(speed_bucket(kmh)).or_default().push(minutes);
        }
        if moves == 0 {
            continue;
        }
        stats.multi_location_user_days += 1;
        stats.movements += moves;
        let visits: Vec<LocationKey> = idx.iter().map(|&i| assignment[i]).collect();
        let distinct: BTreeSet<LocationKey> = visits.iter().copied().collect();
        *movements_hist.entry(moves).or_insert(0) += 1;
        *locations_hist.entry(distinct.len()).or_insert(0) += 1;
        *patterns.entry(canonical_pattern(&visits)).or_insert(0) += 1;
    }

    stats.movements_per_user = normalize_hist(movements_hist);
    stats.locations_per_user = normalize_hist(locations_hist);
    let total_patterns: usize = patterns.values().sum();
    stats.migration_pattern_fractions =
        patterns.into_iter().map(|(k, v)| (k, v as f64 / total_patterns.max(1) as f64)).collect();
    stats.consecutive_distance_cdf =
        dist.into_iter().map(|(k, v)| (k.to_string(), Ecdf::from_samples(v))).collect();
    stats.consecutive_interval_cdf =
        interval.into_iter().map(|(k, v)| (k.to_string(), Ecdf::from_samples(v))).collect();
    stats
}

/// PoI-to-PoI movement counts in [`PoiLabel::LABELED`] order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationCounts {
    pub counts: [[u64; 7]; 7],
    /// Movements with an unlabeled endpoint, kept out of `counts`.
    pub unlabeled: u64,
}

impl MigrationCounts {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn get(&self, from: PoiLabel, to: PoiLabel) -> u64 {
        match (from.index(), to.index()) {
            (Some(i), Some(j)) => self.counts[i][j],
            _ => 0,
        }
    }

    /// Row-normalized matrix; empty rows stay zero.
    pub fn row_stochastic(&self) -> [[f64; 7]; 7] {
        let mut out = [[0.0; 7]; 7];
        for (i, row) in self.counts.iter().enumerate() {
            let s: u64 = row.iter().sum();
            if s > 0 {
                for j in 0..7 {
                    out[i][j] = row[j] as f64 / s as f64;
                }
            }
        }
        out
    }
}

/// Counts movements between PoI-labeled cells. Endpoint labels come from the
/// cells of the two request positions.
pub fn migration_matrix(
    trace: &Trace,
    assignment: &[LocationKey],
    poi: &CellPoiMap,
    clock: DayClock,
) -> MigrationCounts {
    assert_eq!(assignment.len(), trace.len(), "one location per record");
    let mut m = MigrationCounts::default();
    for idx in user_day_groups(trace, clock).into_values() {
        for pair in idx.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if assignment[a] == assignment[b] {
                continue;
            }
            let from = poi.label(CellId::of(trace.records[a].position));
            let to = poi.label(CellId::of(trace.records[b].position));
            match (from.index(), to.index()) {
                (Some(i), Some(j)) => m.counts[i][j] += 1,
                _ => m.unlabeled += 1,
            }
        }
    }
    m
}
