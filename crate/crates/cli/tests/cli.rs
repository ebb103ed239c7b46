use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = "n_users = 60\nn_videos = 150\ndays = 3\ngrid_side = 4\nap_requests_per_node = 200.0\nbs_requests_per_node = 1500.0\nseed = 7\n";

fn edgecache(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgecache")).args(args).output().expect("spawn edgecache")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

/// Generates the small trace into `dir/gen` and returns that directory.
fn generate(dir: &TempDir) -> PathBuf {
    let config = dir.path().join("gen.toml");
    std::fs::write(&config, SMALL).unwrap();
    let out = dir.path().join("gen");
    assert_ok(&edgecache(&["gen", "--config", s(&config), "--out", s(&out)]));
    out
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = generate(&dir);
    let b = dir.path().join("again");
    let config = dir.path().join("gen.toml");
    assert_ok(&edgecache(&["gen", "--config", s(&config), "--out", s(&b)]));
    for f in ["trace.csv", "infrastructure.csv", "videos.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest = read_json(&a.join("manifest.json"));
    assert_eq!(manifest["command"], "gen");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn empty_config_uses_defaults() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("empty.toml");
    std::fs::write(&config, "").unwrap();
    let out = dir.path().join("out");
    assert_ok(&edgecache(&["gen", "--config", s(&config), "--out", s(&out), "--no-infra"]));
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["n_users"], 4000);
    assert!(!out.join("infrastructure.csv").exists());
}

#[test]
fn unknown_config_key_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "n_userz = 3\n").unwrap();
    let out = edgecache(&["gen", "--config", s(&config), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error[input]:"), "{stderr}");
    assert_eq!(stderr.trim_end().lines().count(), 1);
}

#[test]
fn missing_trace_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = edgecache(&["sim", "--trace", s(&missing), "--infra", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(edgecache(&["frobnicate"]).status.code(), Some(1));
    let dir = TempDir::new().unwrap();
    let g = generate(&dir);
    let out = edgecache(&[
        "analyze",
        "--trace",
        s(&g.join("trace.csv")),
        "--which",
        "popularity,bogus",
        "--out",
        s(&dir.path().join("a")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    assert_eq!(edgecache(&["--help"]).status.code(), Some(0));
}

#[test]
fn analyze_writes_requested_metrics() {
    let dir = TempDir::new().unwrap();
    let g = generate(&dir);
    let out = dir.path().join("a");
    assert_ok(&edgecache(&[
        "analyze",
        "--trace",
        s(&g.join("trace.csv")),
        "--infra",
        s(&g.join("infrastructure.csv")),
        "--which",
        "popularity,entropy,kl,mobility",
        "--out",
        s(&out),
    ]));
    for m in ["popularity", "entropy", "kl", "mobility"] {
        assert!(out.join(format!("{m}.json")).exists(), "{m}");
    }
    assert!(!out.join("dft.json").exists());
}

#[test]
fn zero_capacity_has_zero_hit_rate() {
    let dir = TempDir::new().unwrap();
    let g = generate(&dir);
    let out = dir.path().join("sim");
    assert_ok(&edgecache(&[
        "sim",
        "--trace",
        s(&g.join("trace.csv")),
        "--infra",
        s(&g.join("infrastructure.csv")),
        "--capacity",
        "0",
        "--out",
        s(&out),
    ]));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["hit_rate"], 0.0);
    assert!(report["aggregate"]["edge_served"].as_u64().unwrap() > 0);
}

#[test]
fn reference_cross_check_matches() {
    let dir = TempDir::new().unwrap();
    let g = generate(&dir);
    for strategy in ["lru", "lfu", "rr"] {
        let out = dir.path().join(strategy);
        assert_ok(&edgecache(&[
            "sim",
            "--trace",
            s(&g.join("trace.csv")),
            "--infra",
            s(&g.join("infrastructure.csv")),
            "--strategy",
            strategy,
            "--kind",
            "bs",
            "--capacity",
            "5",
            "--reference",
            "--out",
            s(&out),
        ]));
        assert_eq!(read_json(&out.join("reference.json"))["matches"], true, "{strategy}");
    }
}

#[test]
fn single_cell_sweep_equals_sim() {
    let dir = TempDir::new().unwrap();
    let g = generate(&dir);
    let (trace, infra) = (g.join("trace.csv"), g.join("infrastructure.csv"));
    let sim_out = dir.path().join("sim");
    assert_ok(&edgecache(&[
        "sim", "--trace", s(&trace), "--infra", s(&infra), "--strategy", "geocollab", "--kind", "ap", "--capacity", "10",
        "--top-fraction", "0.5", "--out", s(&sim_out),
    ]));
    let sweep_out = dir.path().join("sweep");
    assert_ok(&edgecache(&[
        "sweep", "--trace", s(&trace), "--infra", s(&infra), "--strategies", "geocollab", "--kinds", "ap", "--capacities",
        "10", "--top-fraction", "0.5", "--jobs", "1", "--out", s(&sweep_out),
    ]));
    let report = read_json(&sim_out.join("report.json"));
    let mut rows = csv::Reader::from_path(sweep_out.join("sweep.csv")).unwrap();
    let headers = rows.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["strategy", "capacity", "kind", "hit_rate", "service_rate_request", "service_rate_user"]
    );
    let rows: Vec<csv::StringRecord> = rows.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    let hit: f64 = rows[0][3].parse().unwrap();
    let service: f64 = rows[0][4].parse().unwrap();
    assert_eq!(hit, report["hit_rate"].as_f64().unwrap());
    assert_eq!(service, report["service_rate_request"].as_f64().unwrap());
}
