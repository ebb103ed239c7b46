//! Trace-driven simulation of edge caches on Wi-Fi APs or cellular BSes.
//!
//! Requests are replayed in time order. Each is routed to the nearest node of
//! the configured kind within range, admitted if the node still has
//! transmissions and bandwidth left in the current hourly slot, and then
//! served from (or missed by) that node's cache. Plan-driven caches are
//! replanned at every local midnight from the previous day's routed demand.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cache::{CacheState, GeoCollabConfig, GeoCollabState, Strategy, WindowStats};
use crate::error::{Error, Result};
use crate::geo::{CellId, InfrastructureNode, NodeIndex, NodeKind, PoiLabel};
use crate::stats::max_min_normalize;
use crate::trace::{classify_users, DayClass, DayClock, LocationKey, Trace, UserId, VideoId};

pub mod reference;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub strategy: Strategy,
    pub kind: NodeKind,
    /// Items per cache.
    pub capacity: usize,
    /// Size S of one video in bandwidth units.
    pub video_size: f64,
    pub ap_concurrency: u32,
    pub bs_concurrency: u32,
    /// Per-slot bandwidth, in units of S.
    pub ap_bandwidth: f64,
    pub bs_bandwidth: f64,
    pub ap_radius_m: f64,
    pub bs_radius_m: f64,
    /// Resource accounting slot.
    pub slot_seconds: i64,
    /// Extra node bandwidth, in units of S, consumed by a miss's origin fetch.
    pub origin_fetch_bandwidth: f64,
    pub utc_offset_hours: i32,
    pub seed: u64,
    pub geocollab: GeoCollabConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Lru,
            kind: NodeKind::WifiAp,
            capacity: 20,
            video_size: 1.0,
            ap_concurrency: 20,
            bs_concurrency: 100,
            ap_bandwidth: 20.0,
            bs_bandwidth: 100.0,
            ap_radius_m: 100.0,
            bs_radius_m: 500.0,
            slot_seconds: 3600,
            origin_fetch_bandwidth: 0.0,
            utc_offset_hours: 8,
            seed: 0,
            geocollab: GeoCollabConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("video_size", self.video_size),
            ("ap_bandwidth", self.ap_bandwidth),
            ("bs_bandwidth", self.bs_bandwidth),
            ("ap_radius_m", self.ap_radius_m),
            ("bs_radius_m", self.bs_radius_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.ap_concurrency == 0 || self.bs_concurrency == 0 || self.slot_seconds <= 0 {
            return Err(Error::InvalidConfig("concurrency and slot_seconds must be positive".into()));
        }
        if !(self.origin_fetch_bandwidth >= 0.0) {
            return Err(Error::InvalidConfig("origin_fetch_bandwidth must be >= 0".into()));
        }
        if let Some(s) = self.geocollab.split {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidConfig("geocollab split must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn clock(&self) -> DayClock {
        DayClock::new(self.utc_offset_hours)
    }

    pub fn radius_m(&self) -> f64 {
        match self.kind {
            NodeKind::WifiAp => self.ap_radius_m,
            NodeKind::CellularBs => self.bs_radius_m,
        }
    }

    pub fn concurrency(&self) -> u32 {
        match self.kind {
            NodeKind::WifiAp => self.ap_concurrency,
            NodeKind::CellularBs => self.bs_concurrency,
        }
    }

    pub fn bandwidth(&self) -> f64 {
        let units = match self.kind {
            NodeKind::WifiAp => self.ap_bandwidth,
            NodeKind::CellularBs => self.bs_bandwidth,
        };
        units * self.video_size
    }
}

/// Request outcome counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub requests: u64,
    pub edge_served: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub out_of_range: u64,
    pub capacity_rejected: u64,
}

impl Tally {
    pub fn hit_rate(&self) -> f64 {
        ratio(self.cache_hits, self.edge_served)
    }

    pub fn service_rate(&self) -> f64 {
        ratio(self.edge_served, self.requests)
    }

    pub fn is_conserved(&self) -> bool {
        self.requests == self.edge_served + self.out_of_range + self.capacity_rejected
            && self.edge_served == self.cache_hits + self.cache_misses
    }

    fn add(&mut self, o: &Tally) {
        self.requests += o.requests;
        self.edge_served += o.edge_served;
        self.cache_hits += o.cache_hits;
        self.cache_misses += o.cache_misses;
        self.out_of_range += o.out_of_range;
        self.capacity_rejected += o.capacity_rejected;
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub id: String,
    pub kind: NodeKind,
    pub poi: PoiLabel,
    pub cell: CellId,
    pub tally: Tally,
    pub distinct_videos: u64,
    pub distinct_users: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: Strategy,
    pub kind: NodeKind,
    pub capacity: usize,
    pub aggregate: Tally,
    pub hit_rate: f64,
    pub service_rate_request: f64,
    pub service_rate_user: f64,
    pub users_total: u64,
    pub users_served: u64,
    pub origin_fetches: u64,
    /// Tallies keyed by user-day class ("single", "multi").
    pub classes: BTreeMap<String, Tally>,
    /// Nodes of the simulated kind that received at least one request.
    pub nodes: Vec<NodeReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ServiceMode {
    RequestLevel,
    UserLevel,
}

pub fn service_rate(report: &MetricsReport, mode: ServiceMode) -> f64 {
    match mode {
        ServiceMode::RequestLevel => report.aggregate.service_rate(),
        ServiceMode::UserLevel => ratio(report.users_served, report.users_total),
    }
}

/// Serving node of a request (index into the node list), if any.
pub type Route = Option<usize>;

/// Routes every request to its nearest in-range node of the configured kind.
pub fn route_requests(trace: &Trace, index: &NodeIndex, config: &SimConfig) -> Vec<Route> {
    let radius = config.radius_m();
    trace
        .records
        .iter()
        .map(|r| index.nearest_within(r.position, config.kind, radius).map(|(i, _)| i))
        .collect()
}

fn class_key(c: DayClass) -> &'static str {
    match c {
        DayClass::SingleLocation => "single",
        DayClass::MultiLocation => "multi",
    }
}

/// Location of each request for user-day classification: the serving node,
/// or the request's cell when out of range.
fn locations(trace: &Trace, routes: &[Route]) -> Vec<LocationKey> {
    trace
        .records
        .iter()
        .zip(routes)
        .map(|(r, route)| match route {
            Some(n) => LocationKey::Node(*n as u32),
            None => LocationKey::Cell(CellId::of(r.position)),
        })
        .collect()
}

struct NodeRuntime {
    cache: CacheState,
    slot: i64,
    transmissions: u32,
    bandwidth_used: f64,
    tally: Tally,
    videos: HashSet<VideoId>,
    users: HashSet<UserId>,
}

fn node_seed(seed: u64, node: usize) -> u64 {
    seed ^ (node as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Replays `trace` with explicit routes. User-days are classified by
/// `class_routes` (normally the same as `routes`). `mu` gives the popularity
/// decay rate per video id for plan-driven caches.
pub fn simulate(
    trace: &Trace,
    nodes: &[InfrastructureNode],
    config: &SimConfig,
    routes: &[Route],
    class_routes: &[Route],
    mu: &dyn Fn(VideoId) -> f64,
) -> Result<MetricsReport> {
    config.validate()?;
    for r in [routes, class_routes] {
        if r.len() != trace.len() {
            return Err(Error::LengthMismatch { left: trace.len(), right: r.len() });
        }
    }
    let clock = config.clock();
    let concurrency = config.concurrency();
    let bandwidth = config.bandwidth();
    let hit_cost = config.video_size;
    let miss_cost = config.video_size * (1.0 + config.origin_fetch_bandwidth);
    let geocollab = config.strategy == Strategy::GeoCollab;

    let mut runtimes: Vec<NodeRuntime> = (0..nodes.len())
        .map(|i| NodeRuntime {
            cache: CacheState::new(config.strategy, config.capacity, node_seed(config.seed, i))
                .with_online_fill(config.geocollab.online_fill || config.geocollab.bootstrap_fill),
            slot: i64::MIN,
            transmissions: 0,
            bandwidth_used: 0.0,
            tally: Tally::default(),
            videos: HashSet::new(),
            users: HashSet::new(),
        })
        .collect();
    let mut planner = geocollab.then(|| GeoCollabState::new(nodes.len(), config.capacity, config.geocollab.clone()));
    let mut window: Vec<(usize, UserId, VideoId)> = Vec::new();
    let mut current_day: Option<i64> = None;

    let classes: HashMap<(UserId, i64), DayClass> = classify_users(trace, &locations(trace, class_routes), clock)
        .into_iter()
        .map(|c| ((c.user, c.day), c.class))
        .collect();
    let mut class_tallies = [Tally::default(); 2];
    let mut aggregate = Tally::default();
    let mut origin_fetches = 0u64;
    let mut served_users: HashSet<UserId> = HashSet::new();
    let mut all_users: HashSet<UserId> = HashSet::new();

    for (r, route) in trace.records.iter().zip(routes) {
        let day = clock.day(r.timestamp);
        if current_day != Some(day) {
            if let Some(planner) = planner.as_mut() {
                if !window.is_empty() {
                    let stats = WindowStats::from_requests(nodes.len(), window.drain(..));
                    let plans = planner.end_of_window(&stats, mu);
                    for (rt, plan) in runtimes.iter_mut().zip(plans) {
                        rt.cache.install_plan(plan)?;
                        rt.cache.set_online_fill(config.geocollab.online_fill);
                    }
                }
            }
            current_day = Some(day);
        }
        all_users.insert(r.user);
        let mut t = Tally { requests: 1, ..Tally::default() };
        match *route {
            None => t.out_of_range = 1,
            Some(n) => {
                if geocollab {
                    window.push((n, r.user, r.video));
                }
                let rt = &mut runtimes[n];
                let slot = r.timestamp.div_euclid(config.slot_seconds);
                if slot != rt.slot {
                    rt.slot = slot;
                    rt.transmissions = 0;
                    rt.bandwidth_used = 0.0;
                }
                rt.videos.insert(r.video);
                rt.users.insert(r.user);
                let cost = if rt.cache.contains(r.video) { hit_cost } else { miss_cost };
                if rt.transmissions >= concurrency || rt.bandwidth_used + cost > bandwidth + 1e-9 {
                    t.capacity_rejected = 1;
                } else {
                    rt.transmissions += 1;
                    rt.bandwidth_used += cost;
                    t.edge_served = 1;
                    if rt.cache.access(r.video).is_hit() {
                        t.cache_hits = 1;
                    } else {
                        t.cache_misses = 1;
                        origin_fetches += 1;
                    }
                    served_users.insert(r.user);
                }
                rt.tally.add(&t);
            }
        }
        aggregate.add(&t);
        let class = classes.get(&(r.user, day)).copied().unwrap_or(DayClass::SingleLocation);
        class_tallies[(class == DayClass::MultiLocation) as usize].add(&t);
    }

    let node_reports = nodes
        .iter()
        .zip(&runtimes)
        .filter(|(n, rt)| n.kind == config.kind && rt.tally.requests > 0)
        .map(|(n, rt)| NodeReport {
            id: n.id.clone(),
            kind: n.kind,
            poi: n.poi,
            cell: n.cell(),
            tally: rt.tally,
            distinct_videos: rt.videos.len() as u64,
            distinct_users: rt.users.len() as u64,
        })
        .collect();
    Ok(MetricsReport {
        strategy: config.strategy,
        kind: config.kind,
        capacity: config.capacity,
        aggregate,
        hit_rate: aggregate.hit_rate(),
        service_rate_request: aggregate.service_rate(),
        service_rate_user: ratio(served_users.len() as u64, all_users.len() as u64),
        users_total: all_users.len() as u64,
        users_served: served_users.len() as u64,
        origin_fetches,
        classes: [DayClass::SingleLocation, DayClass::MultiLocation]
            .into_iter()
            .zip(class_tallies)
            .filter(|(_, t)| t.requests > 0)
            .map(|(c, t)| (class_key(c).to_string(), t))
            .collect(),
        nodes: node_reports,
    })
}

/// Runs one simulation with nearest-node routing and the default decay rate.
pub fn run(trace: &Trace, nodes: &[InfrastructureNode], config: &SimConfig) -> Result<MetricsReport> {
    let mu = config.geocollab.default_mu;
    run_with_decay(trace, nodes, config, &|_| mu)
}

pub fn run_with_decay(
    trace: &Trace,
    nodes: &[InfrastructureNode],
    config: &SimConfig,
    mu: &dyn Fn(VideoId) -> f64,
) -> Result<MetricsReport> {
    let index = NodeIndex::new(nodes.to_vec());
    let routes = route_requests(trace, &index, config);
    simulate(trace, nodes, config, &routes, &routes, mu)
}

/// One run per (strategy, capacity), in input order.
pub fn capacity_sweep(
    trace: &Trace,
    nodes: &[InfrastructureNode],
    base: &SimConfig,
    strategies: &[Strategy],
    capacities: &[usize],
) -> Result<Vec<MetricsReport>> {
    if capacities.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("capacities must be ascending".into()));
    }
    let index = NodeIndex::new(nodes.to_vec());
    let routes = route_requests(trace, &index, base);
    let mu = base.geocollab.default_mu;
    let mut out = Vec::new();
    for &strategy in strategies {
        for &capacity in capacities {
            let cfg = SimConfig { strategy, capacity, ..base.clone() };
            out.push(simulate(trace, nodes, &cfg, &routes, &routes, &|_| mu)?);
        }
    }
    Ok(out)
}

/// Keeps the busiest `fraction` of the configured kind's nodes (at least
/// one; ties by id) and drops the requests routed to the others. Nodes of
/// other kinds and out-of-range requests are kept.
pub fn top_nodes_filter(
    trace: &Trace,
    nodes: &[InfrastructureNode],
    config: &SimConfig,
    fraction: f64,
) -> Result<(Vec<InfrastructureNode>, Trace)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig("top fraction must lie in (0, 1]".into()));
    }
    let index = NodeIndex::new(nodes.to_vec());
    let routes = route_requests(trace, &index, config);
    let mut load = vec![0u64; nodes.len()];
    for n in routes.iter().flatten() {
        load[*n] += 1;
    }
    let mut of_kind: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].kind == config.kind).collect();
    if of_kind.is_empty() {
        return Ok((nodes.to_vec(), trace.clone()));
    }
    let keep_n = ((fraction * of_kind.len() as f64 - 1e-9).ceil() as usize).clamp(1, of_kind.len());
    of_kind.sort_by(|&a, &b| load[b].cmp(&load[a]).then_with(|| nodes[a].id.cmp(&nodes[b].id)));
    let kept: BTreeSet<usize> = of_kind[..keep_n].iter().copied().collect();
    let keep_node = |i: usize| nodes[i].kind != config.kind || kept.contains(&i);
    let filtered_nodes = (0..nodes.len()).filter(|&i| keep_node(i)).map(|i| nodes[i].clone()).collect();
    let filtered = trace.filtered(|i, _| routes[i].is_none_or(keep_node));
    Ok((filtered_nodes, filtered))
}

/// Routes every multi-location user's requests for the day to the first node
/// that served them that day, as if they had stayed put, then simulates.
pub fn immobile_counterfactual(trace: &Trace, nodes: &[InfrastructureNode], config: &SimConfig) -> Result<MetricsReport> {
    let index = NodeIndex::new(nodes.to_vec());
    let original = route_requests(trace, &index, config);
    let routes = immobile_routes(trace, &index, config);
    let mu = config.geocollab.default_mu;
    simulate(trace, nodes, config, &routes, &original, &|_| mu)
}

pub fn immobile_routes(trace: &Trace, index: &NodeIndex, config: &SimConfig) -> Vec<Route> {
    let clock = config.clock();
    let mut routes = route_requests(trace, index, config);
    let classes = classify_users(trace, &locations(trace, &routes), clock);
    let multi: HashSet<(UserId, i64)> = classes
        .iter()
        .filter(|c| c.class == DayClass::MultiLocation)
        .map(|c| (c.user, c.day))
        .collect();
    let mut first: HashMap<(UserId, i64), usize> = HashMap::new();
    for (r, route) in trace.records.iter().zip(&routes) {
        let key = (r.user, clock.day(r.timestamp));
        if let (true, Some(n)) = (multi.contains(&key), route) {
            first.entry(key).or_insert(*n);
        }
    }
    for (r, route) in trace.records.iter().zip(routes.iter_mut()) {
        if let Some(&n) = first.get(&(r.user, clock.day(r.timestamp))) {
            *route = Some(n);
        }
    }
    routes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Density,
    VideoDiversity,
    UserDiversity,
    UserClass,
    Poi,
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "density" => Ok(Dimension::Density),
            "video_diversity" => Ok(Dimension::VideoDiversity),
            "user_diversity" => Ok(Dimension::UserDiversity),
            "user_class" => Ok(Dimension::UserClass),
            "poi" => Ok(Dimension::Poi),
            other => Err(Error::UnknownDimension(other.to_string())),
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Density => "density",
            Dimension::VideoDiversity => "video_diversity",
            Dimension::UserDiversity => "user_diversity",
            Dimension::UserClass => "user_class",
            Dimension::Poi => "poi",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRate {
    pub group: String,
    pub nodes: usize,
    pub tally: Tally,
    pub hit_rate: f64,
}

/// Hit rates grouped by a node attribute or by user class. Numeric node
/// attributes (request density; distinct videos or users per request) are
/// max-min normalized across nodes and bucketed into deciles "d0".."d9".
pub fn breakdown(report: &MetricsReport, dimension: Dimension) -> Vec<GroupRate> {
    let mut groups: BTreeMap<String, (usize, Tally)> = BTreeMap::new();
    match dimension {
        Dimension::UserClass => {
            for (k, t) in &report.classes {
                groups.insert(k.clone(), (0, *t));
            }
        }
        Dimension::Poi => {
            for n in &report.nodes {
                let g = groups.entry(n.poi.as_str().to_string()).or_default();
                g.0 += 1;
                g.1.add(&n.tally);
            }
        }
        _ => {
            let raw: Vec<f64> = report
                .nodes
                .iter()
                .map(|n| {
                    let req = n.tally.requests as f64;
                    match dimension {
                        Dimension::Density => req,
                        Dimension::VideoDiversity => n.distinct_videos as f64 / req,
                        _ => n.distinct_users as f64 / req,
                    }
                })
                .collect();
            for (n, x) in report.nodes.iter().zip(max_min_normalize(&raw)) {
                let decile = ((x * 10.0).floor() as usize).min(9);
                let g = groups.entry(format!("d{decile}")).or_default();
                g.0 += 1;
                g.1.add(&n.tally);
            }
        }
    }
    groups
        .into_iter()
        .map(|(group, (nodes, tally))| GroupRate { group, nodes, hit_rate: tally.hit_rate(), tally })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::trace::RequestRecord;

    const T0: i64 = 1_475_251_200;

    fn trace_of(reqs: &[(u32, i64, f64, u32)]) -> Trace {
        let records = reqs
            .iter()
            .map(|&(u, ts, lat, v)| RequestRecord {
                user: UserId(u),
                timestamp: ts,
                position: GeoPoint { lat, lon: 116.305 },
                video: VideoId(v),
            })
            .collect();
        let users = (0..10).map(|i| format!("u{i}")).collect();
        let videos = (0..50).map(|i| format!("v{i:02}")).collect();
        Trace::from_parts(records, users, videos)
    }

    fn ap(id: &str, lat: f64) -> InfrastructureNode {
        InfrastructureNode::new(id, NodeKind::WifiAp, GeoPoint { lat, lon: 116.305 })
    }

    #[test]
    fn compulsory_misses_only() {
        let reqs: Vec<_> = (0..40).map(|i| (0, T0 + i * 4000, 39.905, (i % 7) as u32)).collect();
        let t = trace_of(&reqs);
        let cfg = SimConfig { capacity: 100, ap_concurrency: 1000, ..SimConfig::default() };
        let rep = run(&t, &[ap("a", 39.905)], &cfg).unwrap();
        assert!((rep.hit_rate - (1.0 - 7.0 / 40.0)).abs() < 1e-12);
        assert!(rep.aggregate.is_conserved());
    }

    #[test]
    fn concurrency_limit_rejects() {
        let t = trace_of(&[(0, T0, 39.905, 1), (1, T0 + 60, 39.905, 1)]);
        let cfg = SimConfig { ap_concurrency: 1, ..SimConfig::default() };
        let rep = run(&t, &[ap("a", 39.905)], &cfg).unwrap();
        assert_eq!(rep.aggregate.capacity_rejected, 1);
        assert_eq!(rep.aggregate.edge_served, 1);
    }

    #[test]
    fn out_of_range_and_empty_node_set() {
        let t = trace_of(&[(0, T0, 39.905, 1), (1, T0 + 60, 39.95, 1)]);
        let rep = run(&t, &[ap("a", 39.905)], &SimConfig::default()).unwrap();
        assert_eq!(rep.aggregate.out_of_range, 1);
        let rep = run(&t, &[], &SimConfig::default()).unwrap();
        assert_eq!(rep.aggregate.out_of_range, 2);
        assert_eq!(service_rate(&rep, ServiceMode::UserLevel), 0.0);
        assert_eq!(service_rate(&rep, ServiceMode::RequestLevel), 0.0);
    }

    #[test]
    fn top_filter_keeps_busiest() {
        let mut reqs = Vec::new();
        for n in 0..10 {
            for k in 0..=n {
                reqs.push((0, T0 + (n * 100 + k) as i64, 39.9005 + 0.01 * n as f64, 1));
            }
        }
        let t = trace_of(&reqs);
        let nodes: Vec<_> = (0..10).map(|n| ap(&format!("n{n}"), 39.9005 + 0.01 * n as f64)).collect();
        let (kept, filtered) = top_nodes_filter(&t, &nodes, &SimConfig::default(), 0.1).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "n9");
        assert_eq!(filtered.len(), 10);
        let (all, same) = top_nodes_filter(&t, &nodes, &SimConfig::default(), 1.0).unwrap();
        assert_eq!(all.len(), 10);
        assert_eq!(same, t);
    }

    #[test]
    fn immobile_reroutes_multi_location_users() {
        // User 0 visits node a then b; user 1 stays at b.
        let t = trace_of(&[(0, T0 + 10, 39.905, 1), (0, T0 + 20, 39.915, 2), (1, T0 + 30, 39.915, 3)]);
        let nodes = [ap("a", 39.905), ap("b", 39.915)];
        let index = NodeIndex::new(nodes.to_vec());
        let routes = immobile_routes(&t, &index, &SimConfig::default());
        assert_eq!(routes, vec![Some(0), Some(0), Some(1)]);
        let rep = immobile_counterfactual(&t, &nodes, &SimConfig::default()).unwrap();
        assert_eq!(rep.classes["multi"].requests, 2);
    }

    #[test]
    fn breakdown_dimensions_parse() {
        assert!("nope".parse::<Dimension>().is_err());
        assert_eq!("poi".parse::<Dimension>().unwrap(), Dimension::Poi);
    }
}
