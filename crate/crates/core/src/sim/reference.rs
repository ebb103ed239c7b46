//! Single-loop reference simulator for cross-checking small inputs. Routing
//! is a linear scan and caches are the naive implementations.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{MetricsReport, SimConfig, Tally};
use crate::cache::reference::NaiveCache;
use crate::cache::Strategy;
use crate::error::{Error, Result};
use crate::geo::{haversine, InfrastructureNode};
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceReport {
    pub aggregate: Tally,
    /// (node id, tally) for nodes that received requests, in node order.
    pub nodes: Vec<(String, Tally)>,
    pub users_served: u64,
}

impl ReferenceReport {
    /// Fields of a full report that the reference also computes.
    pub fn project(report: &MetricsReport) -> Self {
        Self {
            aggregate: report.aggregate,
            nodes: report.nodes.iter().map(|n| (n.id.clone(), n.tally)).collect(),
            users_served: report.users_served,
        }
    }
}

/// Naive simulation of LRU, LFU or RR. Plan-driven strategies are rejected.
pub fn run_reference(trace: &Trace, nodes: &[InfrastructureNode], config: &SimConfig) -> Result<ReferenceReport> {
    config.validate()?;
    if config.strategy == Strategy::GeoCollab {
        return Err(Error::InvalidConfig("the reference simulator covers lru, lfu and rr only".into()));
    }
    let radius = config.radius_m();
    let mut caches: Vec<NaiveCache> = (0..nodes.len())
        .map(|i| NaiveCache::new(config.strategy, config.capacity, super::node_seed(config.seed, i)))
        .collect();
    let mut tallies = vec![Tally::default(); nodes.len()];
    let mut slot = vec![i64::MIN; nodes.len()];
    let mut sent = vec![0u32; nodes.len()];
    let mut used = vec![0.0f64; nodes.len()];
    let mut aggregate = Tally::default();
    let mut served = BTreeSet::new();

    for r in &trace.records {
        aggregate.requests += 1;
        let mut best: Option<(usize, f64)> = None;
        for (i, n) in nodes.iter().enumerate() {
            if n.kind != config.kind {
                continue;
            }
            let d = haversine(r.position, n.position);
            let closer = match best {
                None => true,
                Some((b, bd)) => d < bd || (d == bd && n.id < nodes[b].id),
            };
            if closer {
                best = Some((i, d));
            }
        }
        let Some((n, _)) = best.filter(|&(_, d)| d <= radius) else {
            aggregate.out_of_range += 1;
            continue;
        };
        tallies[n].requests += 1;
        let s = r.timestamp.div_euclid(config.slot_seconds);
        if slot[n] != s {
            slot[n] = s;
            sent[n] = 0;
            used[n] = 0.0;
        }
        let cost = if caches[n].contains(r.video) {
            config.video_size
        } else {
            config.video_size * (1.0 + config.origin_fetch_bandwidth)
        };
        if sent[n] >= config.concurrency() || used[n] + cost > config.bandwidth() + 1e-9 {
            tallies[n].capacity_rejected += 1;
            aggregate.capacity_rejected += 1;
            continue;
        }
        sent[n] += 1;
        used[n] += cost;
        tallies[n].edge_served += 1;
        aggregate.edge_served += 1;
        served.insert(r.user);
        if caches[n].access(r.video).is_hit() {
            tallies[n].cache_hits += 1;
            aggregate.cache_hits += 1;
        } else {
            tallies[n].cache_misses += 1;
            aggregate.cache_misses += 1;
        }
    }
    let nodes = nodes
        .iter()
        .zip(tallies)
        .filter(|(n, t)| n.kind == config.kind && t.requests > 0)
        .map(|(n, t)| (n.id.clone(), t))
        .collect();
    Ok(ReferenceReport { aggregate, nodes, users_served: served.len() as u64 })
}
