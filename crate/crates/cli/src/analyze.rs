use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use edgecache::analysis::{
    all_entropies, category_decay_profile, dft_spectrum, dominant_periods, entropy_mobility_fit, entropy_poi_fit,
    hour_of_day_distribution, hourly_series, jaccard, kl_divergence, local_global_rank, mobility_intensity,
    popularity_grades, popularity_histogram,
};
use edgecache::geo::{
    aligned_intensity, coverage_cdf, distance_gap, intensity_similarity, CellId, CellPoiMap, InfrastructureNode,
    NodeIndex, NodeKind,
};
use edgecache::trace::{
    classify_users, migration_matrix, movement_stats, user_day_groups, DayClass, DayClock, LocationKey, Trace, VideoId,
};
use serde_json::{json, Value};

use crate::files::{create_out_dir, input_error, load_catalog, load_infra, load_trace, usage_error, write_json, ManifestBuilder};

pub const METRICS: [&str; 13] = [
    "popularity",
    "local_global",
    "dft",
    "entropy",
    "grades",
    "fits",
    "kl",
    "jaccard",
    "decay",
    "mobility",
    "migration",
    "coverage",
    "similarity",
];

/// Metrics that need an infrastructure file.
const NEEDS_INFRA: [&str; 5] = ["fits", "kl", "migration", "coverage", "similarity"];

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    infra: Option<PathBuf>,
    /// Comma-separated metric names, or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    which: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Local time zone of day boundaries.
    #[arg(long, default_value_t = 8, allow_hyphen_values = true)]
    utc_offset: i32,
    /// Globally most requested videos to rank locally (default: min(1000, catalog)).
    #[arg(long)]
    top_n: Option<usize>,
    /// Hourly series length for the spectrum.
    #[arg(long, default_value_t = 168)]
    hours: usize,
    /// Two cells `row:col,row:col` for the jaccard metric.
    #[arg(long, value_delimiter = ',')]
    cells: Vec<String>,
    /// Video catalog CSV (`video_id,category,decay`) for the decay metric.
    #[arg(long)]
    categories: Option<PathBuf>,
    /// Popularity grade boundaries as count quantiles.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    quantiles: Vec<f64>,
}

struct Ctx<'a> {
    args: &'a AnalyzeArgs,
    trace: Trace,
    nodes: Option<Vec<InfrastructureNode>>,
    clock: DayClock,
    explicit: bool,
}

pub fn run(args: AnalyzeArgs, argv: &[String]) -> Result<()> {
    let mut manifest = ManifestBuilder::start("analyze", argv);
    let explicit = !args.which.iter().any(|w| w == "all");
    let selected: Vec<&str> = if explicit {
        let mut names = Vec::new();
        for w in &args.which {
            let name = METRICS
                .iter()
                .find(|m| **m == w.trim())
                .ok_or_else(|| usage_error(format!("unknown metric `{w}`; valid: all, {}", METRICS.join(", "))))?;
            names.push(*name);
        }
        names
    } else {
        METRICS.to_vec()
    };
    if explicit && args.infra.is_none() {
        if let Some(m) = selected.iter().find(|m| NEEDS_INFRA.contains(m)) {
            return Err(usage_error(format!("metric `{m}` needs --infra")));
        }
    }
    let trace = load_trace(&args.trace)?;
    manifest.input(&args.trace);
    let nodes = match &args.infra {
        Some(p) => {
            manifest.input(p);
            Some(load_infra(p)?)
        }
        None => None,
    };
    if trace.is_empty() {
        return Err(input_error(format!("{}: trace has no records", args.trace.display())));
    }
    if let Some(p) = &args.categories {
        manifest.input(p);
    }
    create_out_dir(&args.out)?;
    let ctx = Ctx { args: &args, trace, nodes, clock: DayClock::new(args.utc_offset), explicit };

    let mut outputs = Vec::new();
    for name in &selected {
        if ctx.nodes.is_none() && NEEDS_INFRA.contains(name) {
            continue;
        }
        let value = ctx.metric(name)?;
        let path = args.out.join(format!("{name}.json"));
        write_json(&path, &json!({ name.to_string(): value }))?;
        outputs.push(path);
    }
    let resolved = json!({
        "which": selected,
        "utc_offset": args.utc_offset,
        "top_n": args.top_n,
        "hours": args.hours,
        "cells": args.cells,
        "quantiles": args.quantiles,
    });
    manifest.finish(&args.out, &resolved, None, &outputs)
}

/// Keeps at most `max` evenly spaced points of a step CDF, always including
/// the last one.
fn thin(steps: Vec<(f64, f64)>, max: usize) -> Vec<(f64, f64)> {
    if steps.len() <= max || max < 2 {
        return steps;
    }
    let n = steps.len();
    (0..max).map(|i| steps[i * (n - 1) / (max - 1)]).collect()
}

fn ecdf_points(samples: Vec<f64>) -> Vec<(f64, f64)> {
    thin(edgecache::stats::Ecdf::from_samples(samples).steps(), 200)
}

fn parse_cell(s: &str) -> Result<CellId> {
    let (r, c) = s.trim().split_once(':').ok_or_else(|| usage_error(format!("cell `{s}` is not row:col")))?;
    let parse = |x: &str| x.trim().parse::<i32>().map_err(|_| usage_error(format!("cell `{s}` is not row:col")));
    Ok(CellId { row: parse(r)?, col: parse(c)? })
}

impl Ctx<'_> {
    fn records(&self) -> &[edgecache::trace::RequestRecord] {
        &self.trace.records
    }

    fn nodes(&self) -> &[InfrastructureNode] {
        self.nodes.as_deref().unwrap_or_default()
    }

    fn metric(&self, name: &str) -> Result<Value> {
        match name {
            "popularity" => self.popularity(),
            "local_global" => self.local_global(),
            "dft" => self.dft(),
            "entropy" => self.entropy(),
            "grades" => self.grades(),
            "fits" => self.fits(),
            "kl" => self.kl(),
            "jaccard" => self.jaccard(),
            "decay" => self.decay(),
            "mobility" => self.mobility(),
            "migration" => self.migration(),
            "coverage" => self.coverage(),
            "similarity" => self.similarity(),
            other => Err(usage_error(format!("unknown metric `{other}`"))),
        }
    }

    fn popularity(&self) -> Result<Value> {
        let p = popularity_histogram(self.records())?;
        Ok(json!({ "slope": p.slope, "status": p.status, "rank_counts": p.rank_counts }))
    }

    fn local_global(&self) -> Result<Value> {
        let distinct = self.records().iter().map(|r| r.video).collect::<BTreeSet<_>>().len();
        let top_n = match self.args.top_n {
            Some(n) => n,
            None => distinct.min(1000),
        };
        let report = local_global_rank(self.records(), top_n).map_err(input_error)?;
        let videos: Vec<Value> = report
            .videos
            .iter()
            .map(|(v, p)| json!({ "video": self.trace.video_token(*v), "mean_local_percentile": p }))
            .collect();
        Ok(json!({ "top_n": top_n, "videos": videos, "cdf": thin(report.cdf, 200) }))
    }

    fn dft(&self) -> Result<Value> {
        let first = self.records()[0].timestamp;
        let start = self.clock.day_start(self.clock.day(first));
        let series = hourly_series(self.records(), start, self.args.hours.max(1));
        let spectrum = dft_spectrum(&series)?;
        let n = spectrum.len();
        let bins: Vec<Value> = (0..n)
            .map(|k| {
                json!({
                    "k": k,
                    "period_hours": if k == 0 { Value::Null } else { json!(n as f64 / k as f64) },
                    "amplitude": spectrum.amplitudes[k],
                    "phase": spectrum.phases[k],
                })
            })
            .collect();
        Ok(json!({ "start": start, "series": series, "spectrum": bins, "dominant": dominant_periods(&spectrum, 5) }))
    }

    fn entropy(&self) -> Result<Value> {
        let (videos, cells) = all_entropies(self.records());
        let grades = popularity_grades(self.records(), &self.args.quantiles);
        let mut by_grade: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for (v, e) in &videos {
            let g = by_grade.entry(grades[v]).or_default();
            g.0 += e.normalized;
            g.1 += 1;
        }
        let grade_means: BTreeMap<String, f64> =
            by_grade.into_iter().map(|(g, (s, n))| (g.to_string(), s / n as f64)).collect();
        let videos: Vec<Value> = videos
            .iter()
            .map(|(v, e)| json!({ "video": self.trace.video_token(*v), "grade": grades[v], "entropy": e }))
            .collect();
        let cells: Vec<Value> = cells.iter().map(|(c, e)| json!({ "cell": c.to_string(), "entropy": e })).collect();
        Ok(json!({ "video_entropy_by_grade": grade_means, "videos": videos, "locations": cells }))
    }

    fn grades(&self) -> Result<Value> {
        let grades = popularity_grades(self.records(), &self.args.quantiles);
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        for g in grades.values() {
            *sizes.entry(*g).or_default() += 1;
        }
        let videos: BTreeMap<&str, usize> = grades.iter().map(|(v, g)| (self.trace.video_token(*v), *g)).collect();
        Ok(json!({ "quantiles": self.args.quantiles, "sizes": sizes, "videos": videos }))
    }

    fn fits(&self) -> Result<Value> {
        let (_, cells) = all_entropies(self.records());
        let poi = CellPoiMap::from_nodes(self.nodes());
        let mut by_count: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for (c, e) in &cells {
            let n = poi.label_count(*c);
            if n > 0 {
                let g = by_count.entry(n).or_default();
                g.0 += e.normalized;
                g.1 += 1;
            }
        }
        let poi_samples: Vec<(f64, f64)> = by_count.iter().map(|(&n, &(s, k))| (n as f64, s / k as f64)).collect();
        let multi = self.multi_location_days(&LocationKey::cells(&self.trace));
        let intensity = mobility_intensity(self.records(), &multi, self.clock);
        let mobility_samples: Vec<(f64, f64)> = intensity
            .iter()
            .filter(|(_, &x)| x > 0.0)
            .filter_map(|(c, &x)| cells.get(c).map(|e| (x, e.normalized)))
            .collect();
        let outcome = |r: edgecache::Result<edgecache::analysis::FitResult>| match r {
            Ok(fit) => json!({ "fit": fit }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        Ok(json!({
            "entropy_vs_poi_count": { "samples": poi_samples, "result": outcome(entropy_poi_fit(&poi_samples)) },
            "entropy_vs_mobility": {
                "samples": mobility_samples.len(),
                "result": outcome(entropy_mobility_fit(&mobility_samples)),
            },
        }))
    }

    fn multi_location_days(&self, assignment: &[LocationKey]) -> BTreeSet<(edgecache::trace::UserId, i64)> {
        classify_users(&self.trace, assignment, self.clock)
            .into_iter()
            .filter(|c| c.class == DayClass::MultiLocation)
            .map(|c| (c.user, c.day))
            .collect()
    }

    /// Per-record serving node of `kind`, if one is in default range.
    fn served_by(&self, index: &NodeIndex, kind: NodeKind) -> Vec<Option<usize>> {
        self.records()
            .iter()
            .map(|r| index.nearest_within(r.position, kind, kind.default_radius_m()).map(|(i, _)| i))
            .collect()
    }

    fn kl(&self) -> Result<Value> {
        let global = hour_of_day_distribution(self.records(), self.clock)?;
        let index = NodeIndex::new(self.nodes().to_vec());
        let mut out = serde_json::Map::new();
        for kind in [NodeKind::WifiAp, NodeKind::CellularBs] {
            let served = self.served_by(&index, kind);
            let mut groups: BTreeMap<(usize, i64), Vec<edgecache::trace::RequestRecord>> = BTreeMap::new();
            for (r, n) in self.records().iter().zip(&served) {
                if let Some(n) = n {
                    groups.entry((*n, self.clock.day(r.timestamp))).or_default().push(*r);
                }
            }
            let mut values = Vec::new();
            for recs in groups.values() {
                let p = hour_of_day_distribution(recs, self.clock)?;
                values.push(kl_divergence(&p, &global)?);
            }
            let mean = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 };
            out.insert(
                kind.to_string(),
                json!({ "node_days": values.len(), "mean": mean, "cdf": ecdf_points(values) }),
            );
        }
        Ok(Value::Object(out))
    }

    fn jaccard(&self) -> Result<Value> {
        let mut sets: HashMap<CellId, BTreeSet<VideoId>> = HashMap::new();
        for r in self.records() {
            sets.entry(CellId::of(r.position)).or_default().insert(r.video);
        }
        let empty = BTreeSet::new();
        let pair = match self.args.cells.as_slice() {
            [] => None,
            [a, b] => {
                let (a, b) = (parse_cell(a)?, parse_cell(b)?);
                let j = jaccard(sets.get(&a).unwrap_or(&empty), sets.get(&b).unwrap_or(&empty));
                Some(json!({ "a": a.to_string(), "b": b.to_string(), "jaccard": j }))
            }
            _ => return Err(usage_error("--cells takes exactly two cells")),
        };
        // Start and first destination of every multi-location user-day.
        let mut pairs: BTreeSet<(CellId, CellId)> = BTreeSet::new();
        for idx in user_day_groups(&self.trace, self.clock).into_values() {
            let start = CellId::of(self.records()[idx[0]].position);
            if let Some(dest) = idx.iter().map(|&i| CellId::of(self.records()[i].position)).find(|&c| c != start) {
                pairs.insert((start, dest));
            }
        }
        let values: Vec<f64> = pairs.iter().map(|(a, b)| jaccard(&sets[a], &sets[b])).collect();
        let below = values.iter().filter(|&&j| j < 0.4).count() as f64 / values.len().max(1) as f64;
        if self.explicit && pair.is_none() && values.is_empty() {
            return Err(input_error("no location pairs to compare"));
        }
        Ok(json!({
            "pair": pair,
            "location_pairs": values.len(),
            "fraction_below_0_4": below,
            "cdf": ecdf_points(values),
        }))
    }

    fn decay(&self) -> Result<Value> {
        let catalog = match &self.args.categories {
            Some(p) => load_catalog(p, &self.trace)?,
            None => vec![None; self.trace.n_videos()],
        };
        let category = |v: VideoId| catalog[v.0 as usize].as_ref().map_or("all", |r| r.category.as_str());
        let names: BTreeSet<&str> = self.records().iter().map(|r| category(r.video)).collect();
        let mut out = serde_json::Map::new();
        for name in names {
            let value = match category_decay_profile(self.records(), |v| category(v) == name, self.clock) {
                Ok(p) => serde_json::to_value(p)?,
                Err(e) => json!({ "error": e.to_string() }),
            };
            out.insert(name.to_string(), value);
        }
        Ok(Value::Object(out))
    }

    fn mobility(&self) -> Result<Value> {
        let cells = LocationKey::cells(&self.trace);
        let classes = classify_users(&self.trace, &cells, self.clock);
        let multi: Vec<_> = classes.iter().filter(|c| c.class == DayClass::MultiLocation).collect();
        let mut locations: BTreeMap<usize, usize> = BTreeMap::new();
        for c in &multi {
            *locations.entry(c.locations_visited).or_default() += 1;
        }
        let stats = movement_stats(&self.trace, &cells, self.clock);
        let cdfs = |m: &BTreeMap<String, edgecache::stats::Ecdf>| -> BTreeMap<String, Vec<(f64, f64)>> {
            m.iter().map(|(k, e)| (k.clone(), thin(e.steps(), 200))).collect()
        };
        Ok(json!({
            "user_days": classes.len(),
            "multi_location_fraction": multi.len() as f64 / classes.len().max(1) as f64,
            "locations_per_multi_location_day": locations,
            "movements": stats.movements,
            "movements_per_user": stats.movements_per_user,
            "locations_per_user": stats.locations_per_user,
            "consecutive_distance_cdf": cdfs(&stats.consecutive_distance_cdf),
            "consecutive_interval_cdf": cdfs(&stats.consecutive_interval_cdf),
            "migration_pattern_fractions": stats.migration_pattern_fractions,
        }))
    }

    fn migration(&self) -> Result<Value> {
        let poi = CellPoiMap::from_nodes(self.nodes());
        let m = migration_matrix(&self.trace, &LocationKey::cells(&self.trace), &poi, self.clock);
        let labels: Vec<&str> = edgecache::geo::PoiLabel::LABELED.iter().map(|l| l.as_str()).collect();
        Ok(json!({
            "labels": labels,
            "counts": m.counts,
            "row_stochastic": m.row_stochastic(),
            "unlabeled_moves": m.unlabeled,
        }))
    }

    fn coverage(&self) -> Result<Value> {
        let points: Vec<_> = self.records().iter().map(|r| r.position).collect();
        let index = NodeIndex::new(self.nodes().to_vec());
        let mut out = serde_json::Map::new();
        for kind in [NodeKind::WifiAp, NodeKind::CellularBs] {
            let value = match coverage_cdf(&points, &index, kind) {
                Ok(cdf) => {
                    let within = cdf.eval(kind.default_radius_m());
                    json!({ "within_default_radius": within, "cdf": thin(cdf.steps(), 200) })
                }
                Err(e) => json!({ "error": e.to_string() }),
            };
            out.insert(kind.to_string(), value);
        }
        let gap = match distance_gap(&points, &index, &index) {
            Ok(g) => json!({ "fraction_bs_farther": g.fraction_positive, "cdf": ecdf_points(g.gaps) }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        out.insert("distance_gap".into(), gap);
        Ok(Value::Object(out))
    }

    fn similarity(&self) -> Result<Value> {
        let mut out = serde_json::Map::new();
        for (name, kind) in [("ap", Some(NodeKind::WifiAp)), ("bs", Some(NodeKind::CellularBs)), ("all", None)] {
            let (_, req, nodes) = aligned_intensity(self.records().iter().map(|r| r.position), self.nodes(), kind);
            let value = match intensity_similarity(&req, &nodes) {
                Ok(s) => json!(s),
                Err(e) => json!({ "error": e.to_string() }),
            };
            out.insert(name.into(), value);
        }
        Ok(Value::Object(out))
    }
}
