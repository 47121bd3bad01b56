//! Experiment runner behind the `slowmix` binary.

pub mod config;
pub mod output;
pub mod suites;

use config::ExperimentConfig;
use output::{sha256_hex, Manifest, Versions};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// JSON schema of the configuration format.
pub const CONFIG_SCHEMA: &str = include_str!("../config.schema.json");

pub struct RunSummary {
    pub out_dir: PathBuf,
    pub failures: Vec<String>,
}

/// Runs the configured suite and writes its artifacts to `out_dir`.
pub fn run_suite(cfg: &ExperimentConfig, out_dir: &Path) -> slowmix::Result<RunSummary> {
    cfg.caps.to_caps().install();
    let result = suites::run(cfg)?;
    let config_json = cfg.canonical_json();
    let config_dir = std::path::absolute(&cfg.dir).unwrap_or_else(|_| cfg.dir.clone());
    let manifest = Manifest {
        suite: cfg.suite.clone(),
        status: if result.failures.is_empty() { "ok" } else { "assertion_failed" }.into(),
        config_sha256: sha256_hex(config_json.as_bytes()),
        versions: Versions::current(),
        master_seed: cfg.seed,
        point_seeds: result.seeds,
        files: Vec::new(),
        failures: result.failures.clone(),
        config_dir: config_dir.display().to_string(),
        config: serde_json::from_str(&config_json).expect("canonical config is JSON"),
    };
    output::write_artifacts(out_dir, &result.tables, manifest, &config_json)?;
    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        failures: result.failures,
    })
}
