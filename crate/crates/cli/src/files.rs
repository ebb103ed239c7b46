//! Error classes, config loading, input parsing and run manifests.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use edgecache::geo::{read_infrastructure, InfrastructureNode};
use edgecache::trace::{parse_trace, Trace, VideoId};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// An error carrying its process exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl Exit {
    pub fn class(&self) -> &'static str {
        match self.code {
            1 => "usage",
            2 => "input",
            _ => "internal",
        }
    }
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

pub fn usage_error(message: impl fmt::Display) -> anyhow::Error {
    Exit { code: 1, message: message.to_string() }.into()
}

pub fn input_error(message: impl fmt::Display) -> anyhow::Error {
    Exit { code: 2, message: message.to_string() }.into()
}

/// Loads a config file as TOML, or as JSON when the extension is `.json`.
/// A missing path yields the defaults.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| input_error(format!("{}: {}", path.display(), e.replace('\n', " "))))
}

pub fn load_trace(path: &Path) -> Result<Trace> {
    let file = fs::File::open(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let (trace, rejected) =
        parse_trace(std::io::BufReader::new(file)).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    if let Some(first) = rejected.first() {
        return Err(input_error(format!(
            "{}: {} malformed line(s), first at line {}: {}",
            path.display(),
            rejected.len(),
            first.line,
            first.reason
        )));
    }
    Ok(trace)
}

pub fn load_infra(path: &Path) -> Result<Vec<InfrastructureNode>> {
    let file = fs::File::open(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    read_infrastructure(std::io::BufReader::new(file)).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

/// One row of the video catalog written by `gen`.
#[derive(Debug, Clone, serde::Deserialize, Serialize)]
pub struct CatalogRow {
    pub video_id: String,
    pub category: String,
    pub decay: f64,
}

/// Reads a catalog CSV and aligns it with the trace's video ids. Videos
/// absent from the catalog get `None`.
pub fn load_catalog(path: &Path, trace: &Trace) -> Result<Vec<Option<CatalogRow>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let mut out = vec![None; trace.n_videos()];
    for (i, row) in reader.deserialize::<CatalogRow>().enumerate() {
        let row = row.map_err(|e| input_error(format!("{}: line {}: {e}", path.display(), i + 2)))?;
        if !(row.decay >= 0.0 && row.decay.is_finite()) {
            return Err(input_error(format!("{}: line {}: decay must be >= 0", path.display(), i + 2)));
        }
        if let Some(VideoId(v)) = trace.video_id(&row.video_id) {
            out[v as usize] = Some(row);
        }
    }
    Ok(out)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| input_error(format!("{}: {e}", dir.display())))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_at: u64,
    pub finished_at: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub struct ManifestBuilder {
    command: String,
    argv: Vec<String>,
    started_at: u64,
    inputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn start(command: &str, argv: &[String]) -> Self {
        Self { command: command.into(), argv: argv.to_vec(), started_at: unix_now(), inputs: Vec::new() }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Digests inputs and outputs and writes `manifest.json` into `out`.
    pub fn finish(self, out: &Path, config: &impl Serialize, seed: Option<u64>, outputs: &[PathBuf]) -> Result<()> {
        let digest = |p: &PathBuf| -> Result<FileDigest> {
            Ok(FileDigest { path: p.display().to_string(), sha256: sha256_file(p)? })
        };
        let manifest = RunManifest {
            command: self.command,
            argv: self.argv,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: serde_json::to_value(config)?,
            inputs: self.inputs.iter().map(digest).collect::<Result<_>>()?,
            outputs: outputs.iter().map(digest).collect::<Result<_>>()?,
            started_at: self.started_at,
            finished_at: unix_now(),
        };
        write_json(&out.join("manifest.json"), &manifest)
    }
}
