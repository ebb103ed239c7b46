use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::Args;
use edgecache::cache::Strategy;
use edgecache::geo::{InfrastructureNode, NodeIndex, NodeKind};
use edgecache::sim::reference::{run_reference, ReferenceReport};
use edgecache::sim::{
    breakdown, immobile_routes, route_requests, simulate, top_nodes_filter, Dimension, MetricsReport, SimConfig,
};
use edgecache::trace::{Trace, VideoId};
use rayon::prelude::*;
use serde::Serialize;

use crate::files::{input_error, load_catalog, load_config, load_infra, load_trace, usage_error, write_json, Exit, ManifestBuilder};
use crate::SimInputs;

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    inputs: SimInputs,
    /// Replacement strategy: lru, lfu, rr or geocollab.
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Node kind: ap or bs.
    #[arg(long)]
    kind: Option<NodeKind>,
    /// Cache capacity in items.
    #[arg(long)]
    capacity: Option<usize>,
    /// Keep only the busiest fraction of nodes of the simulated kind.
    #[arg(long)]
    top_fraction: Option<f64>,
    /// Route every multi-location user-day to its first serving node.
    #[arg(long)]
    immobile_counterfactual: bool,
    /// Overrides the config seed (random replacement draws).
    #[arg(long)]
    seed: Option<u64>,
    /// Cross-check against the naive reference simulator.
    #[arg(long)]
    reference: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    inputs: SimInputs,
    /// Comma-separated strategies.
    #[arg(long, value_delimiter = ',', default_value = "lru,lfu,rr,geocollab")]
    strategies: Vec<Strategy>,
    /// Comma-separated node kinds.
    #[arg(long, value_delimiter = ',', default_value = "ap,bs")]
    kinds: Vec<NodeKind>,
    /// Comma-separated capacities.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20,50,100,200")]
    capacities: Vec<usize>,
    #[arg(long)]
    top_fraction: Option<f64>,
    /// Worker threads (0 = one per core).
    #[arg(long, env = "EDGECACHE_JOBS", default_value_t = 0)]
    jobs: usize,
}

/// Everything a run needs besides the per-run config.
struct Workload {
    trace: Trace,
    nodes: Vec<InfrastructureNode>,
    decay: Option<Vec<Option<f64>>>,
}

impl Workload {
    fn load(inputs: &SimInputs, manifest: &mut ManifestBuilder) -> Result<Self> {
        let trace = load_trace(&inputs.trace)?;
        let nodes = load_infra(&inputs.infra)?;
        manifest.input(&inputs.trace);
        manifest.input(&inputs.infra);
        let decay = match &inputs.categories {
            Some(path) => {
                manifest.input(path);
                Some(load_catalog(path, &trace)?.into_iter().map(|r| r.map(|r| r.decay)).collect())
            }
            None => None,
        };
        Ok(Self { trace, nodes, decay })
    }

    fn mu(&self, config: &SimConfig) -> impl Fn(VideoId) -> f64 + Sync + '_ {
        let default = config.geocollab.default_mu;
        move |v: VideoId| {
            self.decay.as_ref().and_then(|d| d.get(v.0 as usize).copied().flatten()).unwrap_or(default)
        }
    }

    fn filtered(&self, config: &SimConfig, top_fraction: Option<f64>) -> Result<(Vec<InfrastructureNode>, Trace)> {
        match top_fraction {
            Some(f) => top_nodes_filter(&self.trace, &self.nodes, config, f).map_err(usage_error),
            None => Ok((self.nodes.clone(), self.trace.clone())),
        }
    }
}

fn config_for(inputs: &SimInputs, manifest: &mut ManifestBuilder) -> Result<SimConfig> {
    let config: SimConfig = load_config(inputs.config.as_deref())?;
    if let Some(path) = &inputs.config {
        manifest.input(path);
    }
    Ok(config)
}

#[derive(Serialize)]
struct ResolvedSim<'a> {
    #[serde(flatten)]
    config: &'a SimConfig,
    top_fraction: Option<f64>,
    immobile_counterfactual: bool,
}

#[derive(Serialize)]
struct ReferenceCheck {
    matches: bool,
    reference: ReferenceReport,
}

pub fn sim(args: SimArgs, argv: &[String]) -> Result<()> {
    let mut manifest = ManifestBuilder::start("sim", argv);
    let mut config = config_for(&args.inputs, &mut manifest)?;
    if let Some(s) = args.strategy {
        config.strategy = s;
    }
    if let Some(k) = args.kind {
        config.kind = k;
    }
    if let Some(c) = args.capacity {
        config.capacity = c;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.validate().map_err(input_error)?;
    if args.reference && (config.strategy == Strategy::GeoCollab || args.immobile_counterfactual) {
        return Err(usage_error("--reference covers lru, lfu and rr without --immobile-counterfactual"));
    }
    let work = Workload::load(&args.inputs, &mut manifest)?;
    let (nodes, trace) = work.filtered(&config, args.top_fraction)?;
    let index = NodeIndex::new(nodes.clone());
    let original = route_requests(&trace, &index, &config);
    let routes = if args.immobile_counterfactual { immobile_routes(&trace, &index, &config) } else { original.clone() };
    let mu = work.mu(&config);
    let report = simulate(&trace, &nodes, &config, &routes, &original, &mu)?;

    std::fs::create_dir_all(&args.inputs.out)
        .map_err(|e| input_error(format!("{}: {e}", args.inputs.out.display())))?;
    let mut outputs = vec![args.inputs.out.join("report.json"), args.inputs.out.join("breakdown.json")];
    write_json(&outputs[0], &report)?;
    write_json(&outputs[1], &all_breakdowns(&report))?;

    let mut mismatch = false;
    if args.reference {
        let reference = run_reference(&trace, &nodes, &config)?;
        let matches = reference == ReferenceReport::project(&report);
        mismatch = !matches;
        let path = args.inputs.out.join("reference.json");
        write_json(&path, &ReferenceCheck { matches, reference })?;
        outputs.push(path);
    }
    let resolved =
        ResolvedSim { config: &config, top_fraction: args.top_fraction, immobile_counterfactual: args.immobile_counterfactual };
    manifest.finish(&args.inputs.out, &resolved, Some(config.seed), &outputs)?;
    if mismatch {
        return Err(Exit { code: 3, message: "simulator disagrees with the reference; see reference.json".into() }.into());
    }
    Ok(())
}

fn all_breakdowns(report: &MetricsReport) -> serde_json::Value {
    let dims = [Dimension::Density, Dimension::VideoDiversity, Dimension::UserDiversity, Dimension::UserClass, Dimension::Poi];
    let map: serde_json::Map<String, serde_json::Value> = dims
        .iter()
        .map(|&d| (d.to_string(), serde_json::to_value(breakdown(report, d)).unwrap_or_default()))
        .collect();
    serde_json::Value::Object(map)
}

/// One row of the tidy sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub strategy: String,
    pub capacity: usize,
    pub kind: String,
    pub hit_rate: f64,
    pub service_rate_request: f64,
    pub service_rate_user: f64,
}

#[derive(Serialize)]
struct ResolvedSweep<'a> {
    base: &'a SimConfig,
    strategies: Vec<String>,
    kinds: Vec<String>,
    capacities: &'a [usize],
    top_fraction: Option<f64>,
}

pub fn sweep(args: SweepArgs, argv: &[String]) -> Result<()> {
    let mut manifest = ManifestBuilder::start("sweep", argv);
    let base = config_for(&args.inputs, &mut manifest)?;
    base.validate().map_err(input_error)?;
    if args.strategies.is_empty() || args.kinds.is_empty() || args.capacities.is_empty() {
        return Err(usage_error("the sweep grid is empty"));
    }
    let work = Workload::load(&args.inputs, &mut manifest)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build().context("building worker pool")?;

    let mut rows = Vec::new();
    for &kind in &args.kinds {
        let kind_cfg = SimConfig { kind, ..base.clone() };
        let (nodes, trace) = work.filtered(&kind_cfg, args.top_fraction)?;
        let routes = route_requests(&trace, &NodeIndex::new(nodes.clone()), &kind_cfg);
        let cells: Vec<(Strategy, usize)> =
            args.strategies.iter().flat_map(|&s| args.capacities.iter().map(move |&c| (s, c))).collect();
        let mu = work.mu(&base);
        let results: Vec<Result<SweepRow>> = pool.install(|| {
            cells
                .par_iter()
                .map(|&(strategy, capacity)| {
                    let cfg = SimConfig { strategy, capacity, ..kind_cfg.clone() };
                    let r = simulate(&trace, &nodes, &cfg, &routes, &routes, &mu).map_err(|e| {
                        anyhow!("cell strategy={strategy} kind={kind} capacity={capacity}: {e}")
                    })?;
                    Ok(SweepRow {
                        strategy: strategy.to_string(),
                        capacity,
                        kind: kind.to_string(),
                        hit_rate: r.hit_rate,
                        service_rate_request: r.service_rate_request,
                        service_rate_user: r.service_rate_user,
                    })
                })
                .collect()
        });
        for r in results {
            rows.push(r?);
        }
    }
    rows.sort_by(|a, b| (&a.strategy, &a.kind, a.capacity).cmp(&(&b.strategy, &b.kind, b.capacity)));
    rows.dedup_by(|a, b| (&a.strategy, &a.kind, a.capacity) == (&b.strategy, &b.kind, b.capacity));

    std::fs::create_dir_all(&args.inputs.out)
        .map_err(|e| input_error(format!("{}: {e}", args.inputs.out.display())))?;
    let path: PathBuf = args.inputs.out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let resolved = ResolvedSweep {
        base: &base,
        strategies: args.strategies.iter().map(|s| s.to_string()).collect(),
        kinds: args.kinds.iter().map(|k| k.to_string()).collect(),
        capacities: &args.capacities,
        top_fraction: args.top_fraction,
    };
    manifest.finish(&args.inputs.out, &resolved, Some(base.seed), &[path])
}
