//! Long-format CSV tables and the run manifest.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io;
use std::path::Path;

/// Rows of `(parameters..., metric, value, stderr)`.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    rows: Vec<(Vec<String>, String, f64, f64)>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, params: &[String], metric: &str, value: f64, stderr: f64) {
        assert_eq!(params.len(), self.columns.len(), "table {} row width", self.name);
        self.rows.push((params.to_vec(), metric.to_string(), value, stderr));
    }

    /// Row with an exact value (zero stderr).
    pub fn exact(&mut self, params: &[String], metric: &str, value: f64) {
        self.push(params, metric, value, 0.0);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn to_csv(&self) -> io::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = self.columns.clone();
        header.extend(["metric", "value", "stderr"].map(String::from));
        w.write_record(&header)?;
        for (params, metric, value, stderr) in &self.rows {
            let mut rec = params.clone();
            rec.push(metric.clone());
            rec.push(format!("{value:?}"));
            rec.push(format!("{stderr:?}"));
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| io::Error::other(e.to_string()))
    }
}

/// Formats sweep parameters for table cells.
#[macro_export]
macro_rules! cells {
    ($($x:expr),* $(,)?) => { vec![$($x.to_string()),*] };
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct PointSeed {
    pub index: usize,
    pub point: String,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub suite: String,
    pub status: String,
    pub config_sha256: String,
    pub versions: Versions,
    pub master_seed: u64,
    pub point_seeds: Vec<PointSeed>,
    pub files: Vec<FileEntry>,
    pub failures: Vec<String>,
    /// Directory that relative paths in `config` refer to.
    pub config_dir: String,
    pub config: serde_json::Value,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub slowmix: &'static str,
    pub slowmix_cli: &'static str,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            slowmix: slowmix::VERSION,
            slowmix_cli: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// Writes the tables, `config.resolved.json` and `manifest.json` into `dir`.
pub fn write_artifacts(dir: &Path, tables: &[Table], mut manifest: Manifest, config_json: &str) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for t in tables {
        let bytes = t.to_csv()?;
        let name = format!("{}.csv", t.name);
        std::fs::write(dir.join(&name), &bytes)?;
        manifest.files.push(FileEntry {
            name,
            rows: t.len(),
            sha256: sha256_hex(&bytes),
        });
    }
    std::fs::write(dir.join("config.resolved.json"), format!("{config_json}\n"))?;
    let m = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    std::fs::write(dir.join("manifest.json"), format!("{m}\n"))
}
