use std::collections::{BTreeSet, HashMap};

use edgecache::analysis::{dft, entropy_of_counts, jaccard, kl_divergence};
use edgecache::cache::{plan_cache, update_rank};
use edgecache::cache::reference::NaiveCache;
use edgecache::cache::{CacheState, Strategy as Policy};
use edgecache::geo::{haversine, GeoPoint, InfrastructureNode, NodeIndex, NodeKind};
use edgecache::sim::reference::{run_reference, ReferenceReport};
use edgecache::sim::{run, SimConfig};
use edgecache::trace::{parse_trace, write_trace, RequestRecord, Trace, UserId, VideoId};
use proptest::prelude::*;

const BASE_LAT: f64 = 39.9;
const BASE_LON: f64 = 116.3;

fn policy() -> impl Strategy<Value = Policy> {
    prop_oneof![Just(Policy::Lru), Just(Policy::Lfu), Just(Policy::Rr)]
}

fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..10.0, len).prop_filter_map("all zero", |w| {
        let s: f64 = w.iter().sum();
        (s > 0.0).then(|| w.iter().map(|x| x / s).collect())
    })
}

/// A small world: nodes and requests scattered in a ~2 km square.
fn small_world(
    n_nodes: usize,
    n_requests: usize,
) -> impl Strategy<Value = (Vec<InfrastructureNode>, Trace)> {
    let nodes = prop::collection::vec((0.0f64..2000.0, 0.0f64..2000.0, any::<bool>()), 1..=n_nodes);
    let reqs = prop::collection::vec((0u32..30, 0i64..5 * 86_400, 0.0f64..2000.0, 0.0f64..2000.0, 0u32..40), 1..=n_requests);
    (nodes, reqs).prop_map(|(nodes, reqs)| {
        let origin = GeoPoint::new(BASE_LAT, BASE_LON).unwrap();
        let nodes = nodes
            .into_iter()
            .enumerate()
            .map(|(i, (n, e, ap))| {
                let kind = if ap { NodeKind::WifiAp } else { NodeKind::CellularBs };
                InfrastructureNode::new(format!("n{i:02}"), kind, origin.offset_m(n, e))
            })
            .collect();
        let records = reqs
            .into_iter()
            .map(|(u, t, n, e, v)| RequestRecord {
                user: UserId(u),
                timestamp: 1_475_251_200 + t,
                position: origin.offset_m(n, e),
                video: VideoId(v),
            })
            .collect();
        let users = (0..30).map(|u| format!("u{u}")).collect();
        let videos = (0..40).map(|v| format!("v{v}")).collect();
        (nodes, Trace::from_parts(records, users, videos))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cache_matches_naive_model(
        s in policy(),
        capacity in 0usize..8,
        seed in any::<u64>(),
        accesses in prop::collection::vec(0u32..20, 0..300),
    ) {
        let mut fast = CacheState::new(s, capacity, seed);
        let mut slow = NaiveCache::new(s, capacity, seed);
        for v in accesses {
            let v = VideoId(v);
            prop_assert_eq!(fast.access(v), slow.access(v));
            prop_assert!(fast.len() <= capacity);
            prop_assert_eq!(fast.contains(v), slow.contains(v));
        }
    }

    #[test]
    fn simulator_matches_reference(
        (nodes, trace) in small_world(20, 1000),
        s in policy(),
        capacity in 0usize..6,
        kind in prop_oneof![Just(NodeKind::WifiAp), Just(NodeKind::CellularBs)],
        concurrency in 1u32..4,
        seed in any::<u64>(),
    ) {
        let config = SimConfig {
            strategy: s,
            kind,
            capacity,
            ap_concurrency: concurrency,
            bs_concurrency: concurrency,
            ap_bandwidth: concurrency as f64,
            bs_bandwidth: concurrency as f64,
            ap_radius_m: 300.0,
            seed,
            ..SimConfig::default()
        };
        let report = run(&trace, &nodes, &config).unwrap();
        let reference = run_reference(&trace, &nodes, &config).unwrap();
        prop_assert_eq!(ReferenceReport::project(&report), reference);
    }

    #[test]
    fn tallies_are_conserved((nodes, trace) in small_world(10, 400), capacity in 0usize..5, origin in 0.0f64..2.0) {
        let config = SimConfig { capacity, origin_fetch_bandwidth: origin, ap_concurrency: 2, ..SimConfig::default() };
        let report = run(&trace, &nodes, &config).unwrap();
        prop_assert!(report.aggregate.is_conserved());
        prop_assert_eq!(report.aggregate.requests, trace.len() as u64);
        for n in &report.nodes {
            prop_assert!(n.tally.is_conserved());
        }
        let classes: u64 = report.classes.values().map(|t| t.requests).sum();
        prop_assert_eq!(classes, trace.len() as u64);
    }

    #[test]
    fn larger_radius_never_serves_fewer_in_range((nodes, trace) in small_world(10, 300), r1 in 10.0f64..800.0, extra in 0.0f64..800.0) {
        let base = SimConfig { ap_concurrency: 10_000, ap_bandwidth: 10_000.0, ..SimConfig::default() };
        let near = run(&trace, &nodes, &SimConfig { ap_radius_m: r1, ..base.clone() }).unwrap();
        let far = run(&trace, &nodes, &SimConfig { ap_radius_m: r1 + extra, ..base }).unwrap();
        prop_assert!(far.aggregate.out_of_range <= near.aggregate.out_of_range);
    }

    #[test]
    fn nearest_agrees_with_linear_scan((nodes, _) in small_world(40, 1), n in -500.0f64..2500.0, e in -500.0f64..2500.0) {
        let p = GeoPoint::new(BASE_LAT, BASE_LON).unwrap().offset_m(n, e);
        let index = NodeIndex::new(nodes.clone());
        for kind in [Some(NodeKind::WifiAp), Some(NodeKind::CellularBs), None] {
            let expected = nodes
                .iter()
                .enumerate()
                .filter(|(_, x)| kind.is_none_or(|k| x.kind == k))
                .map(|(i, x)| (haversine(p, x.position), &x.id, i))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)))
                .map(|(d, _, i)| (i, d));
            prop_assert_eq!(index.nearest(p, kind), expected);
        }
    }

    #[test]
    fn nearest_within_agrees_across_latitudes(
        lat in -80.0f64..80.0,
        spots in prop::collection::vec((-30_000.0f64..30_000.0, -30_000.0f64..30_000.0), 1..60),
        q in (-40_000.0f64..40_000.0, -40_000.0f64..40_000.0),
        radius in 50.0f64..20_000.0,
    ) {
        let origin = GeoPoint::new(lat, 10.0).unwrap();
        let nodes: Vec<InfrastructureNode> = spots
            .iter()
            .enumerate()
            .map(|(i, &(n, e))| InfrastructureNode::new(format!("x{i:03}"), NodeKind::CellularBs, origin.offset_m(n, e)))
            .collect();
        let p = origin.offset_m(q.0, q.1);
        let index = NodeIndex::new(nodes.clone());
        let expected = nodes
            .iter()
            .enumerate()
            .map(|(i, x)| (haversine(p, x.position), &x.id, i))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)))
            .map(|(d, _, i)| (i, d));
        prop_assert_eq!(index.nearest(p, None), expected);
        prop_assert_eq!(index.nearest_within(p, NodeKind::CellularBs, radius), expected.filter(|&(_, d)| d <= radius));
    }

    #[test]
    fn entropy_is_bounded(counts in prop::collection::vec(0u64..50, 1..40)) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let e = entropy_of_counts(&counts).unwrap();
        prop_assert!(e.raw >= 0.0);
        prop_assert!(e.raw <= (e.support_size as f64).ln() + 1e-12);
        prop_assert!((0.0..=1.0).contains(&e.normalized));
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_self(p in distribution(24), q in distribution(24)) {
        prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn jaccard_is_a_similarity(a in prop::collection::btree_set(0u32..30, 0..20), b in prop::collection::btree_set(0u32..30, 0..20)) {
        let j = jaccard(&a, &b);
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(j, jaccard(&b, &a));
        if !a.is_empty() {
            prop_assert_eq!(jaccard(&a, &a), 1.0);
        }
        let disjoint: BTreeSet<u32> = b.iter().map(|x| x + 100).collect();
        if !a.is_empty() {
            prop_assert_eq!(jaccard(&a, &disjoint), 0.0);
        }
    }

    #[test]
    fn update_rank_normalizes_and_ignores_scale(
        r in distribution(6),
        raw in prop::collection::vec(prop::collection::vec((0usize..6, 0.0f64..1.0), 0..6), 6),
        control in 0.1f64..10.0,
    ) {
        let next = update_rank(&r, &raw, 1.0, 0.0);
        let scaled = update_rank(&r, &raw, control, 0.0);
        let moved = raw.iter().flatten().any(|&(_, o)| o > 0.0);
        if moved && next.iter().sum::<f64>() > 0.0 {
            prop_assert!((next.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (a, b) in next.iter().zip(&scaled) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
        prop_assert!(next.iter().all(|x| x.is_finite() || !moved));
    }

    #[test]
    fn plan_has_capacity_distinct_items(
        capacity in 0usize..20,
        split in 0.0f64..=1.0,
        rho in prop::collection::hash_map(0u32..50, 0.01f64..10.0, 0..40),
        z in prop::collection::hash_map(0u32..50, 0.01f64..10.0, 0..40),
    ) {
        let to_vec = |m: &HashMap<u32, f64>| m.iter().map(|(&v, &s)| (VideoId(v), s)).collect::<Vec<_>>();
        let (rho, z) = (to_vec(&rho), to_vec(&z));
        let plan = plan_cache(capacity, split, &rho, &z);
        let candidates: BTreeSet<VideoId> = rho.iter().chain(&z).map(|&(v, _)| v).collect();
        prop_assert_eq!(plan.len(), capacity.min(candidates.len()));
        let distinct: BTreeSet<VideoId> = plan.iter().copied().collect();
        prop_assert_eq!(distinct.len(), plan.len());
    }

    #[test]
    fn dft_is_linear_and_satisfies_parseval(
        x in prop::collection::vec(-10.0f64..10.0, 1..64),
        a in -3.0f64..3.0,
    ) {
        let y: Vec<f64> = x.iter().rev().copied().collect();
        let combined: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let (fx, fy, fc) = (dft(&x), dft(&y), dft(&combined));
        for k in 0..x.len() {
            prop_assert!((fc[k] - (fx[k] * a + fy[k])).norm() < 1e-8);
        }
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = fx.iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64;
        prop_assert!((time - freq).abs() <= 1e-8 * time.max(1.0));
    }

    #[test]
    fn trace_csv_round_trips((_, trace) in small_world(1, 200)) {
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let (back, rejected) = parse_trace(buf.as_slice()).unwrap();
        prop_assert!(rejected.is_empty());
        prop_assert_eq!(back.len(), trace.len());
        for (a, b) in trace.records.iter().zip(&back.records) {
            prop_assert_eq!(trace.user_token(a.user), back.user_token(b.user));
            prop_assert_eq!(trace.video_token(a.video), back.video_token(b.video));
            prop_assert_eq!(a.timestamp, b.timestamp);
            prop_assert_eq!(a.position, b.position);
        }
    }
}

#[test]
fn zero_capacity_never_hits() {
    let origin = GeoPoint::new(BASE_LAT, BASE_LON).unwrap();
    let nodes = vec![InfrastructureNode::new("a", NodeKind::WifiAp, origin)];
    let records = (0..50)
        .map(|i| RequestRecord { user: UserId(0), timestamp: 1_475_251_200 + i, position: origin, video: VideoId(0) })
        .collect();
    let trace = Trace::from_parts(records, vec!["u".into()], vec!["v".into()]);
    for s in [Policy::Lru, Policy::Lfu, Policy::Rr, Policy::GeoCollab] {
        let report = run(&trace, &nodes, &SimConfig { strategy: s, capacity: 0, ..SimConfig::default() }).unwrap();
        assert_eq!(report.aggregate.cache_hits, 0, "{s}");
        assert_eq!(report.aggregate.edge_served, 20, "{s}");
    }
}
