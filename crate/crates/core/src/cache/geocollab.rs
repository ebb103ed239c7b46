//! Geo-collaborative cache planning.
//!
//! Each location's cache is split in two. One part holds the videos with the
//! highest decayed local popularity ρ; the other holds videos that users who
//! also visit this location found cached elsewhere, weighted by how important
//! those other locations are (rank r, driven by user migrations) and by how
//! much of this location's and the user's traffic the user accounts for.
//! Plans are recomputed once per window (one day) from the previous window.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::trace::{UserId, VideoId};

/// Where the decayed popularity ρ is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopularityScope {
    /// One ρ per (location, video); candidates are videos with ρ > 0 at the
    /// location.
    #[default]
    Location,
    /// One ρ per video over all locations; candidates at a location are the
    /// videos it requested in the last window.
    GlobalWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeoCollabConfig {
    /// Decay rate for videos whose category has none configured.
    pub default_mu: f64,
    /// Floor applied to every rank before renormalization.
    pub rank_floor: f64,
    /// Control parameter M; cancels under normalization.
    pub control: f64,
    /// Insert on miss (LRU eviction) between plans.
    pub online_fill: bool,
    /// Fill on demand until the first plan exists (there is no previous
    /// window to plan from on the first day).
    pub bootstrap_fill: bool,
    /// Fixed popularity share of each cache; per-location single-location
    /// user fraction when absent.
    pub split: Option<f64>,
    pub popularity_scope: PopularityScope,
}

impl Default for GeoCollabConfig {
    fn default() -> Self {
        Self {
            default_mu: 0.3,
            rank_floor: 1e-6,
            control: 1.0,
            online_fill: false,
            bootstrap_fill: true,
            split: None,
            popularity_scope: PopularityScope::Location,
        }
    }
}

/// A multi-location user's weight at one location: d = the user's share of
/// that location's requests, f = the user's request distribution over
/// locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserShare {
    pub d: f64,
    pub f: Vec<(usize, f64)>,
}

/// Everything the planner needs from one window of routed requests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowStats {
    pub n_locations: usize,
    /// Requests per video at each location.
    pub counts: Vec<HashMap<VideoId, u64>>,
    /// Sparse migration ratios: row i lists (l, o_il).
    pub migrations: Vec<Vec<(usize, f64)>>,
    /// Multi-location users seen at each location.
    pub multi_users: Vec<Vec<UserShare>>,
    /// Fraction of single-location users among each location's users
    /// (1 when the location saw nobody).
    pub split: Vec<f64>,
}

impl WindowStats {
    /// Builds window statistics from time-ordered (location, user, video)
    /// triples.
    pub fn from_requests(n_locations: usize, requests: impl IntoIterator<Item = (usize, UserId, VideoId)>) -> Self {
        let mut counts: Vec<HashMap<VideoId, u64>> = vec![HashMap::new(); n_locations];
        let mut per_user: BTreeMap<UserId, Vec<usize>> = BTreeMap::new();
        for (l, u, v) in requests {
            *counts[l].entry(v).or_default() += 1;
            per_user.entry(u).or_default().push(l);
        }
        let totals: Vec<u64> = counts.iter().map(|c| c.values().sum()).collect();

        let mut users_at = vec![0usize; n_locations];
        let mut single_at = vec![0usize; n_locations];
        let mut multi_at = vec![0usize; n_locations];
        let mut moved: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut multi_users: Vec<Vec<UserShare>> = vec![Vec::new(); n_locations];
        for seq in per_user.values() {
            let mut per_loc: BTreeMap<usize, u64> = BTreeMap::new();
            for &l in seq {
                *per_loc.entry(l).or_default() += 1;
            }
            for &l in per_loc.keys() {
                users_at[l] += 1;
            }
            if per_loc.len() < 2 {
                for &l in per_loc.keys() {
                    single_at[l] += 1;
                }
                continue;
            }
            for &l in per_loc.keys() {
                multi_at[l] += 1;
            }
            let transitions: BTreeSet<(usize, usize)> =
                seq.windows(2).filter(|w| w[0] != w[1]).map(|w| (w[0], w[1])).collect();
            for t in transitions {
                *moved.entry(t).or_default() += 1;
            }
            let n = seq.len() as f64;
            let f: Vec<(usize, f64)> = per_loc.iter().map(|(&j, &c)| (j, c as f64 / n)).collect();
            for (&l, &c) in &per_loc {
                multi_users[l].push(UserShare { d: c as f64 / totals[l] as f64, f: f.clone() });
            }
        }
        let mut migrations: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_locations];
        for ((i, l), n) in moved {
            migrations[i].push((l, n as f64 / multi_at[i] as f64));
        }
        let split = (0..n_locations)
            .map(|l| if users_at[l] == 0 { 1.0 } else { single_at[l] as f64 / users_at[l] as f64 })
            .collect();
        Self { n_locations, counts, migrations, multi_users, split }
    }
}

/// One rank iteration: r_l ∝ max(M * sum_i o_il r_i, floor). A window with no
/// migrations leaves r unchanged.
pub fn update_rank(r: &[f64], migrations: &[Vec<(usize, f64)>], control: f64, floor: f64) -> Vec<f64> {
    if !migrations.iter().flatten().any(|&(_, o)| o > 0.0) {
        return r.to_vec();
    }
    let mut next = vec![0.0; r.len()];
    for (i, row) in migrations.iter().enumerate() {
        for &(l, o) in row {
            next[l] += control * o * r[i];
        }
    }
    next.iter_mut().for_each(|x| *x = x.max(floor));
    let total: f64 = next.iter().sum();
    next.iter_mut().for_each(|x| *x /= total);
    next
}

/// Cross-location reference scores z_l(v) = sum over users and locations of
/// r_j d_li f_ij [v in x_prev[j]]. Returned sorted by video id, positive
/// scores only.
pub fn multi_location_scores(r: &[f64], users: &[UserShare], x_prev: &[Vec<VideoId>]) -> Vec<(VideoId, f64)> {
    let mut z: HashMap<VideoId, f64> = HashMap::new();
    for u in users {
        for &(j, f) in &u.f {
            let w = r[j] * u.d * f;
            if w <= 0.0 {
                continue;
            }
            for &v in &x_prev[j] {
                *z.entry(v).or_default() += w;
            }
        }
    }
    let mut out: Vec<(VideoId, f64)> = z.into_iter().filter(|&(_, s)| s > 0.0).collect();
    out.sort_unstable_by_key(|&(v, _)| v);
    out
}

/// ρ_v ← count_v + exp(-μ_v) ρ_v for every video seen now or before.
pub fn local_popularity_update(
    rho: &mut HashMap<VideoId, f64>,
    window_counts: &HashMap<VideoId, u64>,
    mu: impl Fn(VideoId) -> f64,
) {
    rho.retain(|&v, x| {
        *x *= (-mu(v)).exp();
        *x > 1e-300
    });
    for (&v, &c) in window_counts {
        *rho.entry(v).or_default() += c as f64;
    }
}

fn ranked(scores: &[(VideoId, f64)]) -> Vec<VideoId> {
    let mut s: Vec<(VideoId, f64)> = scores.iter().copied().filter(|&(_, x)| x > 0.0).collect();
    s.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    s.into_iter().map(|(v, _)| v).collect()
}

/// Plans one cache: the top ceil(split * C) videos by ρ, then the best
/// remaining videos by z, then leftover ρ candidates for any slots still
/// free. Ties go to the smaller video id. Output is in priority order.
pub fn plan_cache(capacity: usize, split: f64, rho: &[(VideoId, f64)], z: &[(VideoId, f64)]) -> Vec<VideoId> {
    let split = split.clamp(0.0, 1.0);
    let y_slots = ((split * capacity as f64) - 1e-9).ceil().max(0.0) as usize;
    let by_rho = ranked(rho);
    let by_z = ranked(z);
    let mut plan: Vec<VideoId> = Vec::with_capacity(capacity);
    let mut chosen: BTreeSet<VideoId> = BTreeSet::new();
    for &v in by_rho.iter().take(y_slots.min(capacity)) {
        chosen.insert(v);
        plan.push(v);
    }
    for &v in by_z.iter().chain(by_rho.iter()) {
        if plan.len() >= capacity {
            break;
        }
        if chosen.insert(v) {
            plan.push(v);
        }
    }
    plan
}

/// Planner state carried across windows.
#[derive(Debug, Clone)]
pub struct GeoCollabState {
    pub config: GeoCollabConfig,
    pub capacity: usize,
    pub r: Vec<f64>,
    /// Per-location ρ (one shared map for the global scope).
    pub rho: Vec<HashMap<VideoId, f64>>,
    /// Plans of the previous window, in priority order.
    pub x_prev: Vec<Vec<VideoId>>,
}

impl GeoCollabState {
    pub fn new(n_locations: usize, capacity: usize, config: GeoCollabConfig) -> Self {
        let maps = match config.popularity_scope {
            PopularityScope::Location => n_locations,
            PopularityScope::GlobalWindow => 1,
        };
        Self {
            config,
            capacity,
            r: vec![1.0 / n_locations.max(1) as f64; n_locations],
            rho: vec![HashMap::new(); maps],
            x_prev: vec![Vec::new(); n_locations],
        }
    }

    /// Consumes one window and returns the new plans for every location.
    pub fn end_of_window(&mut self, w: &WindowStats, mu: impl Fn(VideoId) -> f64) -> &[Vec<VideoId>] {
        self.r = update_rank(&self.r, &w.migrations, self.config.control, self.config.rank_floor);
        match self.config.popularity_scope {
            PopularityScope::Location => {
                for (rho, counts) in self.rho.iter_mut().zip(&w.counts) {
                    local_popularity_update(rho, counts, &mu);
                }
            }
            PopularityScope::GlobalWindow => {
                let mut all: HashMap<VideoId, u64> = HashMap::new();
                for counts in &w.counts {
                    for (&v, &c) in counts {
                        *all.entry(v).or_default() += c;
                    }
                }
                local_popularity_update(&mut self.rho[0], &all, &mu);
            }
        }
        let mut plans = Vec::with_capacity(self.x_prev.len());
        for l in 0..self.x_prev.len() {
            let candidates: Vec<(VideoId, f64)> = match self.config.popularity_scope {
                PopularityScope::Location => self.rho[l].iter().map(|(&v, &x)| (v, x)).collect(),
                PopularityScope::GlobalWindow => {
                    w.counts[l].keys().map(|v| (*v, self.rho[0].get(v).copied().unwrap_or(0.0))).collect()
                }
            };
            let z = multi_location_scores(&self.r, &w.multi_users[l], &self.x_prev);
            let split = self.config.split.unwrap_or(w.split[l]);
            plans.push(plan_cache(self.capacity, split, &candidates, &z));
        }
        self.x_prev = plans;
        &self.x_prev
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> VideoId {
        VideoId(i)
    }

    #[test]
    fn uniform_rank_is_fixed_point() {
        let l = 4;
        let o: Vec<Vec<(usize, f64)>> = (0..l).map(|_| (0..l).map(|j| (j, 0.25)).collect()).collect();
        let r = update_rank(&[0.25; 4], &o, 3.0, 1e-6);
        assert!(r.iter().all(|x| (x - 0.25).abs() < 1e-12));
    }

    #[test]
    fn all_migration_to_second_location() {
        let o = vec![vec![(1, 1.0)], vec![]];
        let mut r = vec![0.5, 0.5];
        for _ in 0..5 {
            r = update_rank(&r, &o, 1.0, 1e-6);
        }
        assert!(r[1] > 0.999 && r[0] < 1e-5);
        assert_eq!(update_rank(&[0.3, 0.7], &[vec![], vec![]], 1.0, 1e-6), vec![0.3, 0.7]);
    }

    #[test]
    fn single_term_score() {
        let users = vec![UserShare { d: 0.5, f: vec![(1, 0.4)] }];
        let z = multi_location_scores(&[0.3, 0.7], &users, &[vec![], vec![v(1)]]);
        assert_eq!(z.len(), 1);
        assert!((z[0].1 - 0.7 * 0.5 * 0.4).abs() < 1e-15);
        assert!(multi_location_scores(&[1.0], &[], &[vec![v(1)]]).is_empty());
    }

    #[test]
    fn popularity_decay_arithmetic() {
        let mut rho = HashMap::new();
        let mu = |_| 2f64.ln();
        local_popularity_update(&mut rho, &HashMap::from([(v(1), 3)]), mu);
        local_popularity_update(&mut rho, &HashMap::from([(v(1), 5)]), mu);
        assert!((rho[&v(1)] - 6.5).abs() < 1e-12);
        let mut rho = HashMap::from([(v(1), 10.0)]);
        local_popularity_update(&mut rho, &HashMap::from([(v(1), 2)]), |_| f64::INFINITY);
        assert_eq!(rho[&v(1)], 2.0);
    }

    #[test]
    fn plan_dedup_and_refill() {
        // ρ ranks A, B, C; z ranks B, D.
        let rho = [(v(0), 9.0), (v(1), 8.0), (v(2), 7.0)];
        let z = [(v(1), 5.0), (v(3), 4.0)];
        assert_eq!(plan_cache(3, 2.0 / 3.0, &rho, &z), vec![v(0), v(1), v(3)]);
        assert_eq!(plan_cache(3, 1.0, &rho, &z), vec![v(0), v(1), v(2)]);
        assert_eq!(plan_cache(3, 0.0, &rho, &z), vec![v(1), v(3), v(0)]);
        assert_eq!(plan_cache(10, 0.5, &rho, &z).len(), 4);
    }

    #[test]
    fn window_stats_shares() {
        let u = |i| UserId(i);
        // User 0 moves 0 -> 1 -> 0; user 1 stays at 0.
        let reqs = vec![(0, u(0), v(1)), (1, u(0), v(2)), (0, u(0), v(1)), (0, u(1), v(3))];
        let w = WindowStats::from_requests(2, reqs);
        assert_eq!(w.migrations[0], vec![(1, 1.0)]);
        assert_eq!(w.migrations[1], vec![(0, 1.0)]);
        assert_eq!(w.split, vec![0.5, 0.0]);
        let share = &w.multi_users[0][0];
        assert!((share.d - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(share.f, vec![(0, 2.0 / 3.0), (1, 1.0 / 3.0)]);
    }
}
