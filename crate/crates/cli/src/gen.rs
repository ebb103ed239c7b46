use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use edgecache::geo::write_infrastructure;
use edgecache::trace::{generate_trace, write_trace, TraceConfig};

use crate::files::{create_out_dir, input_error, load_config, CatalogRow, ManifestBuilder};

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Trace generator config (TOML, or JSON by extension). Defaults apply
    /// to every omitted key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Skip writing the co-generated infrastructure.
    #[arg(long)]
    no_infra: bool,
}

pub fn run(args: GenArgs, argv: &[String]) -> Result<()> {
    let mut manifest = ManifestBuilder::start("gen", argv);
    let mut config: TraceConfig = load_config(args.config.as_deref())?;
    if let Some(path) = &args.config {
        manifest.input(path);
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate().map_err(input_error)?;
    let generated = generate_trace(&config).map_err(input_error)?;
    create_out_dir(&args.out)?;

    let mut outputs = Vec::new();
    let trace_path = args.out.join("trace.csv");
    let file = File::create(&trace_path).with_context(|| format!("creating {}", trace_path.display()))?;
    write_trace(BufWriter::new(file), &generated.trace)?;
    outputs.push(trace_path);

    if !args.no_infra {
        let path = args.out.join("infrastructure.csv");
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_infrastructure(BufWriter::new(file), &generated.infrastructure())?;
        outputs.push(path);
    }

    let path = args.out.join("videos.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    for (i, token) in generated.trace.video_tokens().iter().enumerate() {
        let c = &config.categories[generated.video_category(edgecache::trace::VideoId(i as u32))];
        w.serialize(CatalogRow { video_id: token.clone(), category: c.name.clone(), decay: c.decay })?;
    }
    w.flush()?;
    outputs.push(path);

    manifest.finish(&args.out, &config, Some(config.seed), &outputs)
}
