//! Synthetic workload generator.
//!
//! The synthetic city is a square block of 0.01° cells, each carrying a PoI
//! label and a small lattice of sites (buildings). Every user lives at one
//! site. On a multi-location day a user walks back and forth along a short
//! path of distinct cells whose labels follow the migration matrix; on other
//! days all requests come from home.
//!
//! Videos follow a global Zipf law but are locally anchored: each video has a
//! home cell and spreads over a number of nearby cells that grows with the
//! logarithm of its inverse rank, with geometric weights over those cells.
//! A user's requests mix a small personal favorite list, the local interest
//! of their home cell, and (when away) the local interest of where they are.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DayClock, RequestRecord, Trace, UserId, VideoId};
use crate::error::{Error, Result};
use crate::geo::{CellId, GeoPoint, InfrastructureNode, NodeKind, PoiLabel, CELL_DEG};

/// Migration counts between PoI categories over two weeks of real traffic,
/// rows = from, columns = to, in [`PoiLabel::LABELED`] order.
const MIGRATION_COUNTS: [[f64; 7]; 7] = [
    [4908.0, 2205.0, 5114.0, 1379.0, 595.0, 1082.0, 657.0],
    [2223.0, 1741.0, 3479.0, 802.0, 394.0, 698.0, 360.0],
    [5145.0, 3425.0, 9994.0, 1787.0, 995.0, 1727.0, 907.0],
    [1369.0, 797.0, 1743.0, 843.0, 230.0, 367.0, 222.0],
    [596.0, 399.0, 984.0, 215.0, 183.0, 187.0, 123.0],
    [1101.0, 692.0, 1671.0, 358.0, 234.0, 494.0, 169.0],
    [616.0, 367.0, 928.0, 214.0, 114.0, 202.0, 213.0],
];

/// The measured migration counts normalized by row.
pub fn default_migration_matrix() -> [[f64; 7]; 7] {
    let mut m = MIGRATION_COUNTS;
    for row in m.iter_mut() {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    m
}

/// Stationary distribution of a row-stochastic matrix by power iteration.
pub fn stationary_distribution(m: &[[f64; 7]; 7]) -> [f64; 7] {
    let mut pi = [1.0 / 7.0; 7];
    for _ in 0..10_000 {
        let mut next = [0.0; 7];
        for i in 0..7 {
            for j in 0..7 {
                next[j] += pi[i] * m[i][j];
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if delta < 1e-15 {
            break;
        }
    }
    pi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Release {
    /// Whole category available from the first day.
    Start,
    /// Release day drawn uniformly over the trace span.
    Staggered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryConfig {
    pub name: String,
    /// Fraction of the catalog in this category.
    pub share: f64,
    /// Daily popularity decay rate μ (per day, natural log scale).
    pub decay: f64,
    pub release: Release,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub n_users: usize,
    pub n_videos: usize,
    pub days: usize,
    pub zipf_exponent: f64,
    /// Target fraction of user-days that are multi-location.
    pub multi_location_fraction: f64,
    /// Fraction of users who ever travel; the daily travel probability of a
    /// traveller is `multi_location_fraction / commuter_share`.
    pub commuter_share: f64,
    /// Weights for 2, 3, 4, ... distinct locations on a multi-location day.
    pub location_count_weights: Vec<f64>,
    /// Success probability of the geometric number of movements beyond the
    /// number of distinct locations.
    pub extra_movement_p: f64,
    pub max_movements: usize,
    /// Probability a traveller's multi-location day repeats their fixed
    /// route rather than a freshly drawn one.
    pub routine_adherence: f64,
    pub min_daily_requests: usize,
    pub mean_extra_requests: f64,
    pub migration_matrix: [[f64; 7]; 7],
    /// Per-PoI relative amplitudes of the 24 h, 12 h and 8 h components.
    pub diurnal_weights: [[f64; 3]; 7],
    /// Local hour at which each of the three components peaks.
    pub diurnal_peak_hours: [f64; 3],
    /// Ratio of 18:00–24:00 volume to 12:00–18:00 volume.
    pub evening_boost: f64,
    pub utc_offset_hours: i32,
    /// Epoch second of the first local midnight.
    pub start_epoch: i64,
    pub origin_lat: f64,
    pub origin_lon: f64,
    /// Cells per side of the square city.
    pub grid_side: usize,
    /// Sites per side of the lattice inside each cell.
    pub sites_per_cell_side: usize,
    /// Geometric weight ratio of the spatial spread kernel.
    pub spread_decay: f64,
    /// Zipf exponent of residential density over sites (0 = uniform).
    pub population_skew: f64,
    /// Probability a request is drawn from the user's favorites.
    pub personal_interest: f64,
    pub favorites_per_user: usize,
    /// Probability an away-from-home request follows home-cell interest
    /// rather than the visited cell's.
    pub away_home_interest: f64,
    pub categories: Vec<CategoryConfig>,
    /// Requests per generated AP at full match (lower = denser APs).
    pub ap_requests_per_node: f64,
    pub bs_requests_per_node: f64,
    /// 1.0 places nodes in proportion to request intensity; 0.0 spreads
    /// them uniformly over all sites/cells.
    pub infra_match: f64,
    pub seed: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            n_users: 4000,
            n_videos: 2000,
            days: 14,
            zipf_exponent: 0.8,
            multi_location_fraction: 0.30,
            commuter_share: 0.4,
            location_count_weights: vec![0.5, 0.3, 0.1, 0.1],
            extra_movement_p: 0.45,
            max_movements: 30,
            routine_adherence: 0.0,
            min_daily_requests: 10,
            mean_extra_requests: 4.0,
            migration_matrix: default_migration_matrix(),
            diurnal_weights: [
                [0.35, 0.20, 0.30],
                [0.45, 0.20, 0.15],
                [0.60, 0.25, 0.15],
                [0.45, 0.25, 0.20],
                [0.40, 0.20, 0.15],
                [0.45, 0.25, 0.20],
                [0.30, 0.20, 0.15],
            ],
            diurnal_peak_hours: [21.0, 21.0, 21.0],
            evening_boost: 1.74,
            utc_offset_hours: 8,
            start_epoch: 1_475_251_200,
            origin_lat: 39.90,
            origin_lon: 116.30,
            grid_side: 10,
            sites_per_cell_side: 3,
            spread_decay: 0.85,
            population_skew: 1.0,
            personal_interest: 0.3,
            favorites_per_user: 20,
            away_home_interest: 0.8,
            categories: vec![CategoryConfig {
                name: "general".into(),
                share: 1.0,
                decay: 0.0,
                release: Release::Start,
            }],
            ap_requests_per_node: 3000.0,
            bs_requests_per_node: 20_000.0,
            infra_match: 1.0,
            seed: 42,
        }
    }
}

impl TraceConfig {
    pub fn clock(&self) -> DayClock {
        DayClock::new(self.utc_offset_hours)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_videos == 0 {
            return bad("n_videos must be positive");
        }
        if self.days == 0 {
            return bad("days must be positive");
        }
        if !(self.zipf_exponent > 0.0 && self.zipf_exponent.is_finite()) {
            return bad("zipf_exponent must be > 0");
        }
        for (name, v) in [
            ("multi_location_fraction", self.multi_location_fraction),
            ("commuter_share", self.commuter_share),
            ("personal_interest", self.personal_interest),
            ("away_home_interest", self.away_home_interest),
            ("infra_match", self.infra_match),
            ("routine_adherence", self.routine_adherence),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.multi_location_fraction > self.commuter_share {
            return bad("multi_location_fraction cannot exceed commuter_share");
        }
        if !(self.extra_movement_p > 0.0 && self.extra_movement_p <= 1.0) {
            return bad("extra_movement_p must lie in (0, 1]");
        }
        if self.location_count_weights.is_empty()
            || self.location_count_weights.iter().any(|&w| !(w >= 0.0))
            || self.location_count_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("location_count_weights must be non-negative with positive sum");
        }
        let max_locations = self.location_count_weights.len() + 1;
        if self.min_daily_requests < max_locations {
            return bad("min_daily_requests must allow visiting every location");
        }
        if self.max_movements + 1 < max_locations {
            return bad("max_movements too small for the location counts");
        }
        if !(self.mean_extra_requests >= 0.0) {
            return bad("mean_extra_requests must be >= 0");
        }
        for row in &self.migration_matrix {
            if row.iter().any(|&x| !(x >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad("migration_matrix rows must be non-negative and sum to 1");
            }
        }
        if self.grid_side == 0 || self.sites_per_cell_side == 0 {
            return bad("grid_side and sites_per_cell_side must be positive");
        }
        if self.grid_side * self.grid_side < max_locations {
            return bad("grid too small for the location counts");
        }
        if !(self.spread_decay > 0.0 && self.spread_decay <= 1.0) {
            return bad("spread_decay must lie in (0, 1]");
        }
        if !(self.population_skew >= 0.0 && self.population_skew.is_finite()) {
            return bad("population_skew must be >= 0");
        }
        if !(self.evening_boost > 0.0) {
            return bad("evening_boost must be positive");
        }
        if self.categories.is_empty() || self.categories.iter().any(|c| !(c.share >= 0.0) || !(c.decay >= 0.0)) {
            return bad("categories need non-negative shares and decays");
        }
        if self.categories.iter().map(|c| c.share).sum::<f64>() <= 0.0 {
            return bad("category shares must have positive sum");
        }
        if !(self.ap_requests_per_node > 0.0 && self.bs_requests_per_node > 0.0) {
            return bad("requests per node must be positive");
        }
        GeoPoint::new(self.origin_lat, self.origin_lon)?;
        Ok(())
    }

    /// Hour-of-day weights (24 entries) for each PoI category, with the
    /// shared 24 h correction that pins the evening/afternoon ratio.
    pub fn hourly_profiles(&self) -> Result<[[f64; 24]; 7]> {
        let pi = stationary_distribution(&self.migration_matrix);
        let ratio = |beta: f64| {
            let profiles = self.profiles_with(beta);
            let agg = |h: usize| -> f64 { (0..7).map(|p| pi[p] * profiles[p][h]).sum() };
            let evening: f64 = (18..24).map(agg).sum();
            let afternoon: f64 = (12..18).map(agg).sum();
            evening / afternoon
        };
        let (mut lo, mut hi) = (-3.0, 3.0);
        if (ratio(lo) - self.evening_boost) * (ratio(hi) - self.evening_boost) > 0.0 {
            return Err(Error::InvalidConfig("evening_boost unreachable with these diurnal weights".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ratio(mid) < self.evening_boost {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(self.profiles_with(0.5 * (lo + hi)))
    }

    fn profiles_with(&self, beta: f64) -> [[f64; 24]; 7] {
        let tau = std::f64::consts::TAU;
        let periods = [24.0, 12.0, 8.0];
        let mut out = [[0.0; 24]; 7];
        for (p, amps) in self.diurnal_weights.iter().enumerate() {
            for (h, slot) in out[p].iter_mut().enumerate() {
                let t = h as f64 + 0.5;
                let mut v = 1.0 + beta * (tau * (t - 21.0) / 24.0).cos();
                for k in 0..3 {
                    v += amps[k] * (tau * (t - self.diurnal_peak_hours[k]) / periods[k]).cos();
                }
                *slot = v.max(0.02);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Site {
    pub cell: u32,
    pub position: GeoPoint,
    /// Relative attractiveness for visitors.
    pub weight: f64,
    /// Relative residential density.
    pub density: f64,
}

/// The synthetic city behind a generated trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct World {
    pub cells: Vec<CellId>,
    pub cell_labels: Vec<PoiLabel>,
    pub sites: Vec<Site>,
    pub cell_sites: Vec<Vec<u32>>,
    /// Category index per catalog video (catalog order = popularity rank).
    pub video_category: Vec<usize>,
    pub video_release_day: Vec<usize>,
    pub video_anchor: Vec<u32>,
    pub user_home_site: Vec<u32>,
}

impl World {
    pub fn cell_label(&self, cell: CellId) -> PoiLabel {
        self.cells
            .iter()
            .position(|&c| c == cell)
            .map(|i| self.cell_labels[i])
            .unwrap_or(PoiLabel::Unlabeled)
    }

    pub fn poi_map(&self) -> crate::geo::CellPoiMap {
        crate::geo::CellPoiMap::from_labels(self.cells.iter().copied().zip(self.cell_labels.iter().copied()))
    }
}

/// A generated trace together with the world that produced it.
#[derive(Debug, Clone)]
pub struct Generated {
    pub config: TraceConfig,
    pub trace: Trace,
    pub world: World,
    /// Site index of every record, aligned with `trace.records`.
    pub record_site: Vec<u32>,
    /// Catalog index of every trace video id.
    pub video_catalog_index: Vec<u32>,
}

impl Generated {
    pub fn video_category(&self, v: VideoId) -> usize {
        self.world.video_category[self.video_catalog_index[v.0 as usize] as usize]
    }

    /// Co-generates APs and BSes in proportion to request intensity, blended
    /// toward a uniform layout by `1 - infra_match`.
    pub fn infrastructure(&self) -> Vec<InfrastructureNode> {
        let cfg = &self.config;
        let world = &self.world;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1f2a_5e11);
        let mut site_load = vec![0.0f64; world.sites.len()];
        for &s in &self.record_site {
            site_load[s as usize] += 1.0;
        }
        let mut cell_load = vec![0.0f64; world.cells.len()];
        for (s, load) in site_load.iter().enumerate() {
            cell_load[world.sites[s].cell as usize] += load;
        }
        let m = cfg.infra_match;
        let mean_site = site_load.iter().sum::<f64>() / site_load.len().max(1) as f64;
        let mean_cell = cell_load.iter().sum::<f64>() / cell_load.len().max(1) as f64;

        let mut nodes = Vec::new();
        let mut ap_positions = Vec::new();
        for (s, site) in world.sites.iter().enumerate() {
            let w = m * site_load[s] + (1.0 - m) * mean_site;
            if w <= 0.0 {
                continue;
            }
            let n = ((w / cfg.ap_requests_per_node).round() as usize).max(1);
            for k in 0..n {
                let pos = if k == 0 {
                    site.position
                } else {
                    let r = rng.random_range(8.0..20.0);
                    let a = rng.random_range(0.0..std::f64::consts::TAU);
                    site.position.offset_m(r * a.sin(), r * a.cos())
                };
                ap_positions.push((pos, world.cell_labels[site.cell as usize]));
            }
        }
        let width = digits(ap_positions.len());
        for (i, (pos, poi)) in ap_positions.into_iter().enumerate() {
            nodes.push(InfrastructureNode::new(format!("ap{i:0width$}"), NodeKind::WifiAp, pos).with_poi(poi));
        }

        let mut bs_positions = Vec::new();
        for (c, cell) in world.cells.iter().enumerate() {
            let w = m * cell_load[c] + (1.0 - m) * mean_cell;
            if w <= 0.0 {
                continue;
            }
            let n = ((w / cfg.bs_requests_per_node).round() as usize).max(1);
            for k in 0..n {
                let pos = if k == 0 {
                    cell.center()
                } else {
                    let r = rng.random_range(50.0..150.0);
                    let a = rng.random_range(0.0..std::f64::consts::TAU);
                    cell.center().offset_m(r * a.sin(), r * a.cos())
                };
                bs_positions.push((pos, world.cell_labels[c]));
            }
        }
        let width = digits(bs_positions.len());
        for (i, (pos, poi)) in bs_positions.into_iter().enumerate() {
            nodes.push(InfrastructureNode::new(format!("bs{i:0width$}"), NodeKind::CellularBs, pos).with_poi(poi));
        }
        nodes
    }
}

fn digits(n: usize) -> usize {
    n.saturating_sub(1).max(1).to_string().len()
}

fn geometric(rng: &mut impl Rng, p: f64) -> usize {
    if p >= 1.0 {
        return 0;
    }
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    (u.ln() / (1.0 - p).ln()).floor() as usize
}

/// Deterministic hash to [0, 1), used for per-(user, site) spots.
fn unit_hash(a: u64, b: u64, c: u64) -> f64 {
    let mut z = a
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(b.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(c.wrapping_mul(0x94D0_49BB_1331_11EB));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

fn user_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Largest-remainder apportionment of `total` items by `weights`.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let s: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / s * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut rest: Vec<usize> = (0..weights.len()).collect();
    rest.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let missing = total - out.iter().sum::<usize>();
    for &i in rest.iter().take(missing) {
        out[i] += 1;
    }
    out
}

struct Catalog {
    zipf: Vec<f64>,
    /// Per cell: (video, kernel weight) for every video whose spread covers it.
    cell_entries: Vec<Vec<(u32, f64)>>,
}

fn spread_size(rank: usize, n_videos: usize, n_cells: usize) -> usize {
    if n_videos <= 1 {
        return n_cells;
    }
    let frac = ((n_videos as f64) / rank as f64).ln() / (n_videos as f64).ln();
    (1 + ((n_cells - 1) as f64 * frac).round() as usize).clamp(1, n_cells)
}

fn build_catalog(cfg: &TraceConfig, world: &World, rng: &mut ChaCha8Rng) -> Catalog {
    let n_cells = world.cells.len();
    let zipf: Vec<f64> = (1..=cfg.n_videos).map(|r| (r as f64).powf(-cfg.zipf_exponent)).collect();
    let mut cell_entries: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_cells];
    let mut order: Vec<(i64, u32, usize)> = Vec::with_capacity(n_cells);
    for v in 0..cfg.n_videos {
        let anchor = world.cells[world.video_anchor[v] as usize];
        order.clear();
        for (ci, c) in world.cells.iter().enumerate() {
            let (dr, dc) = ((c.row - anchor.row) as i64, (c.col - anchor.col) as i64);
            order.push((dr * dr + dc * dc, rng.random(), ci));
        }
        let k = spread_size(v + 1, cfg.n_videos, n_cells);
        if k < n_cells {
            order.select_nth_unstable(k - 1);
            order.truncate(k);
        }
        order.sort_unstable();
        let mut w = 1.0;
        let mut total = 0.0;
        let mut weights = Vec::with_capacity(k);
        for _ in 0..k {
            weights.push(w);
            total += w;
            w *= cfg.spread_decay;
        }
        for (&(_, _, ci), wt) in order.iter().zip(weights) {
            cell_entries[ci].push((v as u32, wt / total));
        }
    }
    Catalog { zipf, cell_entries }
}

fn build_world(cfg: &TraceConfig, rng: &mut ChaCha8Rng) -> World {
    let origin = CellId::of(GeoPoint { lat: cfg.origin_lat, lon: cfg.origin_lon });
    let side = cfg.grid_side;
    let cells: Vec<CellId> = (0..side * side)
        .map(|i| CellId { row: origin.row + (i / side) as i32, col: origin.col + (i % side) as i32 })
        .collect();
    let pi = stationary_distribution(&cfg.migration_matrix);
    let quota = apportion(cells.len(), &pi);
    let mut cell_labels: Vec<PoiLabel> =
        quota.iter().enumerate().flat_map(|(l, &n)| std::iter::repeat_n(PoiLabel::LABELED[l], n)).collect();
    cell_labels.shuffle(rng);

    let s = cfg.sites_per_cell_side;
    let mut sites = Vec::new();
    let mut cell_sites = vec![Vec::new(); cells.len()];
    for (ci, c) in cells.iter().enumerate() {
        let mut weights: Vec<f64> = (0..s * s).map(|i| 1.0 / (1.0 + i as f64)).collect();
        weights.shuffle(rng);
        for a in 0..s {
            for b in 0..s {
                let lat = (c.row as f64 + (a as f64 + 0.5) / s as f64) * CELL_DEG;
                let lon = (c.col as f64 + (b as f64 + 0.5) / s as f64) * CELL_DEG;
                cell_sites[ci].push(sites.len() as u32);
                sites.push(Site { cell: ci as u32, position: GeoPoint { lat, lon }, weight: weights[a * s + b], density: 0.0 });
            }
        }
    }

    let mut density_rank: Vec<usize> = (0..sites.len()).collect();
    density_rank.shuffle(rng);
    for (rank, &site) in density_rank.iter().enumerate() {
        sites[site].density = (rank as f64 + 1.0).powf(-cfg.population_skew);
    }

    let shares: Vec<f64> = cfg.categories.iter().map(|c| c.share).collect();
    let counts = apportion(cfg.n_videos, &shares);
    let mut video_category: Vec<usize> =
        counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
    video_category.shuffle(rng);
    let video_release_day = video_category
        .iter()
        .map(|&c| match cfg.categories[c].release {
            Release::Start => 0,
            Release::Staggered => rng.random_range(0..cfg.days),
        })
        .collect();
    let video_anchor = (0..cfg.n_videos).map(|_| rng.random_range(0..cells.len() as u32)).collect();

    World { cells, cell_labels, sites, cell_sites, video_category, video_release_day, video_anchor, user_home_site: Vec::new() }
}

/// Per-day sampling tables for each cell's local interest.
struct LocalTables {
    /// [day][cell] → (videos, sampler)
    tables: Vec<Vec<(Vec<u32>, WeightedIndex<f64>)>>,
    /// [day][video] availability after release and decay, in [0, 1].
    day_factor: Vec<Vec<f64>>,
}

impl LocalTables {
    fn build(cfg: &TraceConfig, world: &World, catalog: &Catalog) -> Self {
        let day_factor = |v: usize, d: usize| {
            let release = world.video_release_day[v];
            if d < release {
                0.0
            } else {
                (-cfg.categories[world.video_category[v]].decay * (d - release) as f64).exp()
            }
        };
        let factors: Vec<Vec<f64>> =
            (0..cfg.days).map(|d| (0..cfg.n_videos).map(|v| day_factor(v, d)).collect()).collect();
        // Scale each video's daily weight by its mean availability so that
        // lifetime volume keeps the configured Zipf shape.
        let mean: Vec<f64> = (0..cfg.n_videos)
            .map(|v| factors.iter().map(|f| f[v]).sum::<f64>() / cfg.days.max(1) as f64)
            .collect();
        let tables = (0..cfg.days)
            .map(|d| {
                catalog
                    .cell_entries
                    .iter()
                    .map(|entries| {
                        let vids: Vec<u32> = entries.iter().map(|&(v, _)| v).collect();
                        let mut w: Vec<f64> = entries
                            .iter()
                            .map(|&(v, k)| {
                                let v = v as usize;
                                if mean[v] > 0.0 { catalog.zipf[v] * k * factors[d][v] / mean[v] } else { 0.0 }
                            })
                            .collect();
                        if w.iter().sum::<f64>() <= 0.0 {
                            w = entries.iter().map(|&(v, k)| catalog.zipf[v as usize] * k).collect();
                        }
                        (vids, WeightedIndex::new(&w).expect("cell has positive interest"))
                    })
                    .collect()
            })
            .collect();
        Self { tables, day_factor: factors }
    }

    fn sample(&self, day: usize, cell: usize, rng: &mut impl Rng) -> u32 {
        let (vids, dist) = &self.tables[day][cell];
        vids[dist.sample(rng)]
    }
}

struct UserPlan {
    home_cell: usize,
    home_site: usize,
    traveller: bool,
    /// Up to two favourite (cell, site) per label.
    favourite_places: Vec<Vec<(usize, usize)>>,
    favourites: Vec<u32>,
    favourite_dist: Option<WeightedIndex<f64>>,
}

/// Generates a synthetic trace. Deterministic in the config (including seed);
/// each user draws from its own random stream.
pub fn generate_trace(cfg: &TraceConfig) -> Result<Generated> {
    cfg.validate()?;
    let profiles = cfg.hourly_profiles()?;
    let mut rng = user_rng(cfg.seed, 0);
    let mut world = build_world(cfg, &mut rng);
    let catalog = build_catalog(cfg, &world, &mut rng);
    let tables = LocalTables::build(cfg, &world, &catalog);
    let clock = cfg.clock();
    let pi = stationary_distribution(&cfg.migration_matrix);

    let n_cells = world.cells.len();
    let mut label_cells: Vec<Vec<usize>> = vec![Vec::new(); 7];
    for (ci, l) in world.cell_labels.iter().enumerate() {
        label_cells[l.index().unwrap()].push(ci);
    }
    let label_dist = WeightedIndex::new(pi.iter().copied().map(|p| p.max(1e-12))).unwrap();
    let hour_dists: Vec<WeightedIndex<f64>> =
        profiles.iter().map(|p| WeightedIndex::new(p.iter().copied()).unwrap()).collect();
    let row_dists: Vec<WeightedIndex<f64>> = cfg
        .migration_matrix
        .iter()
        .map(|row| WeightedIndex::new(row.iter().map(|&x| x.max(0.0))).unwrap())
        .collect();
    let k_dist = WeightedIndex::new(&cfg.location_count_weights).unwrap();
    let daily_travel = if cfg.commuter_share > 0.0 { cfg.multi_location_fraction / cfg.commuter_share } else { 0.0 };
    let extra_p = 1.0 / (1.0 + cfg.mean_extra_requests);

    struct Row {
        ts: i64,
        user: u32,
        pos: GeoPoint,
        video: u32,
        site: u32,
    }
    let mut rows: Vec<Row> = Vec::new();
    world.user_home_site = Vec::with_capacity(cfg.n_users);

    for u in 0..cfg.n_users {
        let mut rng = user_rng(cfg.seed, u as u64 + 1);
        let plan = plan_user(cfg, &world, &label_cells, &label_dist, &tables, &mut rng);
        world.user_home_site.push(plan.home_site as u32);
        let home_label = world.cell_labels[plan.home_cell].index().unwrap();
        let routine = plan.traveller.then(|| {
            let k = 2 + k_dist.sample(&mut rng);
            build_path(cfg, &world, &plan, &label_cells, &row_dists, k, &mut rng)
        });

        let spot = |site: usize, jitter: (f64, f64)| -> GeoPoint {
            let r = 20.0 * unit_hash(cfg.seed, u as u64, site as u64).sqrt();
            let a = std::f64::consts::TAU * unit_hash(cfg.seed ^ 0xabcdef, u as u64, site as u64);
            world.sites[site].position.offset_m(r * a.sin() + jitter.0, r * a.cos() + jitter.1)
        };

        for day in 0..cfg.days {
            let n = cfg.min_daily_requests + geometric(&mut rng, extra_p);
            let day_start = cfg.start_epoch + (day as i64) * 86_400;
            let mut times: Vec<i64> = (0..n)
                .map(|_| {
                    let h = hour_dists[home_label].sample(&mut rng) as i64;
                    day_start + h * 3600 + rng.random_range(0..3600)
                })
                .collect();
            times.sort_unstable();

            // (cell, site) of every request, in time order.
            let mut places: Vec<(usize, usize)> = vec![(plan.home_cell, plan.home_site); n];
            if plan.traveller && rng.random::<f64>() < daily_travel {
                let path = match &routine {
                    Some(r) if rng.random::<f64>() < cfg.routine_adherence => r.clone(),
                    _ => {
                        let k = 2 + k_dist.sample(&mut rng);
                        build_path(cfg, &world, &plan, &label_cells, &row_dists, k, &mut rng)
                    }
                };
                let k = path.len();
                let moves = (k + geometric(&mut rng, cfg.extra_movement_p)).min(cfg.max_movements).min(n - 1).max(k - 1);
                let mut visit = Vec::with_capacity(moves + 1);
                let mut at = 0usize;
                visit.push(0);
                for step in 0..moves {
                    at = if step < k - 1 {
                        step + 1
                    } else if at == 0 {
                        1
                    } else if at == k - 1 {
                        k - 2
                    } else if rng.random::<bool>() {
                        at + 1
                    } else {
                        at - 1
                    };
                    visit.push(at);
                }
                let mut cuts: Vec<usize> = (1..n).collect();
                cuts.shuffle(&mut rng);
                cuts.truncate(moves);
                cuts.sort_unstable();
                let mut seg = 0;
                for (i, place) in places.iter_mut().enumerate() {
                    while seg < cuts.len() && cuts[seg] <= i {
                        seg += 1;
                    }
                    *place = path[visit[seg]];
                }
            }

            for (i, &(cell, site)) in places.iter().enumerate() {
                let video = pick_video(cfg, &plan, &tables, day, cell, &mut rng);
                let jitter = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                rows.push(Row { ts: times[i], user: u as u32, pos: spot(site, jitter), video, site: site as u32 });
            }
        }
    }
    debug_assert!(n_cells > 0);
    let _ = clock;

    rows.sort_by_key(|r| (r.ts, r.user));

    let used_users: BTreeSet<u32> = rows.iter().map(|r| r.user).collect();
    let used_videos: BTreeSet<u32> = rows.iter().map(|r| r.video).collect();
    let user_width = digits(cfg.n_users);
    let video_width = digits(cfg.n_videos);
    let users: Vec<u32> = used_users.into_iter().collect();
    let videos: Vec<u32> = used_videos.into_iter().collect();
    let mut user_map = vec![u32::MAX; cfg.n_users];
    for (i, &u) in users.iter().enumerate() {
        user_map[u as usize] = i as u32;
    }
    let mut video_map = vec![u32::MAX; cfg.n_videos];
    for (i, &v) in videos.iter().enumerate() {
        video_map[v as usize] = i as u32;
    }
    let records: Vec<RequestRecord> = rows
        .iter()
        .map(|r| RequestRecord {
            user: UserId(user_map[r.user as usize]),
            timestamp: r.ts,
            position: r.pos,
            video: VideoId(video_map[r.video as usize]),
        })
        .collect();
    let record_site = rows.iter().map(|r| r.site).collect();
    let trace = Trace::from_parts(
        records,
        users.iter().map(|u| format!("u{u:0user_width$}")).collect(),
        videos.iter().map(|v| format!("v{v:0video_width$}")).collect(),
    );
    Ok(Generated { config: cfg.clone(), trace, world, record_site, video_catalog_index: videos })
}

fn pick_site(world: &World, cell: usize, rng: &mut impl Rng) -> usize {
    let sites = &world.cell_sites[cell];
    let total: f64 = sites.iter().map(|&s| world.sites[s as usize].weight).sum();
    let mut x = rng.random::<f64>() * total;
    for &s in sites {
        x -= world.sites[s as usize].weight;
        if x <= 0.0 {
            return s as usize;
        }
    }
    *sites.last().unwrap() as usize
}

fn plan_user(
    cfg: &TraceConfig,
    world: &World,
    label_cells: &[Vec<usize>],
    label_dist: &WeightedIndex<f64>,
    tables: &LocalTables,
    rng: &mut ChaCha8Rng,
) -> UserPlan {
    let home_label = loop {
        let l = label_dist.sample(rng);
        if !label_cells[l].is_empty() {
            break l;
        }
    };
    let home_site = {
        let sites: Vec<u32> =
            label_cells[home_label].iter().flat_map(|&c| world.cell_sites[c].iter().copied()).collect();
        let dist = WeightedIndex::new(sites.iter().map(|&s| world.sites[s as usize].density)).unwrap();
        sites[dist.sample(rng)] as usize
    };
    let home_cell = world.sites[home_site].cell as usize;
    let traveller = rng.random::<f64>() < cfg.commuter_share;

    let home = world.cells[home_cell];
    let favourite_places = label_cells
        .iter()
        .map(|cells| {
            let mut cand: Vec<(f64, usize)> = cells
                .iter()
                .filter(|&&c| c != home_cell)
                .map(|&c| {
                    let cc = world.cells[c];
                    let d = (((cc.row - home.row).pow(2) + (cc.col - home.col).pow(2)) as f64).sqrt();
                    // Exponential-race sampling without replacement, distance-weighted.
                    let key = -rng.random_range(f64::MIN_POSITIVE..1.0).ln() / (-d / 3.0).exp();
                    (key, c)
                })
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0));
            cand.iter().take(2).map(|&(_, c)| (c, pick_site(world, c, rng))).collect()
        })
        .collect();

    let mut favourites: Vec<u32> = Vec::new();
    for _ in 0..cfg.favorites_per_user {
        let v = tables.sample(0, home_cell, rng);
        if !favourites.contains(&v) {
            favourites.push(v);
        }
    }
    let favourite_dist = if favourites.is_empty() {
        None
    } else {
        Some(WeightedIndex::new((1..=favourites.len()).map(|r| 1.0 / r as f64)).unwrap())
    };
    UserPlan { home_cell, home_site, traveller, favourite_places, favourites, favourite_dist }
}

/// Distinct cells visited on a multi-location day, home first. Each new
/// location's label is drawn from the migration row of the previous one.
fn build_path(
    cfg: &TraceConfig,
    world: &World,
    plan: &UserPlan,
    label_cells: &[Vec<usize>],
    row_dists: &[WeightedIndex<f64>],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    let _ = cfg;
    let mut path = vec![(plan.home_cell, plan.home_site)];
    let in_path = |path: &[(usize, usize)], c: usize| path.iter().any(|&(pc, _)| pc == c);
    while path.len() < k {
        let prev_label = world.cell_labels[path.last().unwrap().0].index().unwrap();
        let mut next = None;
        for _ in 0..32 {
            let j = row_dists[prev_label].sample(rng);
            if let Some(&fav) = plan.favourite_places[j].iter().find(|&&(c, _)| !in_path(&path, c)) {
                next = Some(fav);
                break;
            }
            let free: Vec<usize> = label_cells[j].iter().copied().filter(|&c| !in_path(&path, c)).collect();
            if !free.is_empty() {
                let c = free[rng.random_range(0..free.len())];
                next = Some((c, pick_site(world, c, rng)));
                break;
            }
        }
        let next = next.unwrap_or_else(|| {
            let free: Vec<usize> = (0..world.cells.len()).filter(|&c| !in_path(&path, c)).collect();
            let c = free[rng.random_range(0..free.len())];
            (c, pick_site(world, c, rng))
        });
        path.push(next);
    }
    path
}

fn pick_video(cfg: &TraceConfig, plan: &UserPlan, tables: &LocalTables, day: usize, cell: usize, rng: &mut ChaCha8Rng) -> u32 {
    if let Some(dist) = &plan.favourite_dist {
        if rng.random::<f64>() < cfg.personal_interest {
            let v = plan.favourites[dist.sample(rng)];
            // Decayed or unreleased favourites give way to local interest.
            if rng.random::<f64>() < tables.day_factor[day][v as usize] {
                return v;
            }
        }
    }
    let source = if cell == plan.home_cell || rng.random::<f64>() < cfg.away_home_interest {
        plan.home_cell
    } else {
        cell
    };
    tables.sample(day, source, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TraceConfig {
        TraceConfig { n_users: 50, n_videos: 200, days: 2, ..TraceConfig::default() }
    }

    #[test]
    fn default_matrix_is_row_stochastic() {
        let m = default_migration_matrix();
        for row in m {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // Hospital → Business share of the Hospital row.
        assert!((m[1][0] - 2223.0 / 9697.0).abs() < 1e-12);
        let pi = stationary_distribution(&m);
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_users_gives_empty_trace() {
        let g = generate_trace(&TraceConfig { n_users: 0, ..small() }).unwrap();
        assert!(g.trace.is_empty());
    }

    #[test]
    fn infeasible_configs_rejected() {
        assert!(generate_trace(&TraceConfig { n_videos: 0, ..small() }).is_err());
        let mut cfg = small();
        cfg.migration_matrix[0][0] += 0.1;
        assert!(generate_trace(&cfg).is_err());
        assert!(generate_trace(&TraceConfig { multi_location_fraction: 1.5, ..small() }).is_err());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = generate_trace(&small()).unwrap();
        let b = generate_trace(&small()).unwrap();
        assert_eq!(a.trace, b.trace);
        let c = generate_trace(&TraceConfig { seed: 7, ..small() }).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn every_user_day_meets_minimum_volume() {
        let g = generate_trace(&small()).unwrap();
        let active = super::super::active_users(&g.trace, g.config.clock(), 10);
        assert_eq!(active.len(), 50);
    }

    #[test]
    fn profiles_hit_evening_boost() {
        let cfg = TraceConfig::default();
        let profiles = cfg.hourly_profiles().unwrap();
        let pi = stationary_distribution(&cfg.migration_matrix);
        let agg = |h: usize| (0..7).map(|p| pi[p] * profiles[p][h]).sum::<f64>();
        let ratio = (18..24).map(agg).sum::<f64>() / (12..18).map(agg).sum::<f64>();
        assert!((ratio - 1.74).abs() < 1e-6);
    }

    #[test]
    fn spread_grows_with_popularity() {
        assert_eq!(spread_size(1, 2000, 100), 100);
        assert_eq!(spread_size(2000, 2000, 100), 1);
        assert!(spread_size(10, 2000, 100) > spread_size(500, 2000, 100));
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(10, &[0.5, 0.3, 0.2]), vec![5, 3, 2]);
        assert_eq!(apportion(3, &[1.0, 1.0]).iter().sum::<usize>(), 3);
    }
}
