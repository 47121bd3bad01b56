//! Experiment configuration: loading, typed suite parameters and diagnostics.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use slowmix::operator::Caps;
use std::fmt;
use std::path::{Path, PathBuf};

pub const SUITES: [&str; 8] = [
    "fk-verify",
    "davies-fixed-point",
    "mixing-vs-bound",
    "tfim-bottleneck",
    "code-expansion",
    "classical-barrier",
    "lightcone",
    "chen-truncation",
];

/// A config problem pointing at a line of the source file when possible.
#[derive(Debug)]
pub struct Diagnostic {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub source_line: Option<String>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            writeln!(f, "{}:{}:{}: {}", self.file, self.line, self.column, self.message)?;
        } else {
            writeln!(f, "{}: {}", self.file, self.message)?;
        }
        if let Some(src) = &self.source_line {
            writeln!(f, "{:>5} | {}", self.line, src)?;
            write!(f, "      | {}^", " ".repeat(self.column.saturating_sub(1)))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CapsConfig {
    #[serde(default = "default_operator_cap")]
    pub operator_qubits: usize,
    #[serde(default = "default_superop_cap")]
    pub superop_qubits: usize,
    #[serde(default = "default_enumeration_cap")]
    pub enumeration_spins: usize,
}

fn default_operator_cap() -> usize {
    Caps::default().operator_qubits
}
fn default_superop_cap() -> usize {
    Caps::default().superop_qubits
}
fn default_enumeration_cap() -> usize {
    Caps::default().enumeration_spins
}

impl Default for CapsConfig {
    fn default() -> Self {
        let c = Caps::default();
        CapsConfig {
            operator_qubits: c.operator_qubits,
            superop_qubits: c.superop_qubits,
            enumeration_spins: c.enumeration_spins,
        }
    }
}

impl CapsConfig {
    pub fn to_caps(&self) -> Caps {
        Caps {
            operator_qubits: self.operator_qubits,
            superop_qubits: self.superop_qubits,
            enumeration_spins: self.enumeration_spins,
        }
    }
}

/// Sweep axes. Suites fall back to their own defaults for missing axes.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    #[serde(rename = "ising_1d")]
    Ising1d {
        #[serde(default = "one")]
        coupling: f64,
        #[serde(default)]
        periodic: bool,
    },
    #[serde(rename = "ising_2d")]
    Ising2d {
        #[serde(default)]
        periodic: bool,
    },
    CurieWeiss,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    /// Davies generator with single-qubit jumps, sampled with the discrete
    /// one-step channel.
    Davies {
        #[serde(default = "default_profile")]
        profile: slowmix::lindblad::GammaProfile,
        /// Single-qubit Pauli letters used as jump operators.
        #[serde(default = "default_jumps")]
        jumps: String,
        /// Channel step; the largest admissible step when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
}

fn default_profile() -> slowmix::lindblad::GammaProfile {
    slowmix::lindblad::GammaProfile::Metropolis
}
fn default_jumps() -> String {
    "XZ".into()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    /// `A = {m > w}`, `B = {|m| <= w}`, `C = {m < -w}`; `w = n mod 2` when omitted.
    MagBand {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        half_width: Option<i64>,
    },
    /// Fraction of the system size: `|m| <= eps n`.
    MagFraction { eps: f64 },
    /// Crossing-cluster classification with fault-line threshold `c0 L`.
    FaultLine { c0: f64 },
}

/// Top-level experiment description. `params` is parsed per suite.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig<'a> {
    #[serde(default)]
    suite: Option<String>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    threads: Option<usize>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    caps: CapsConfig,
    #[serde(default)]
    model: Option<ModelSpec>,
    #[serde(default)]
    sampler: Option<SamplerSpec>,
    #[serde(default)]
    region: Option<RegionSpec>,
    #[serde(default)]
    sweep: Sweep,
    #[serde(default)]
    #[serde(borrow)]
    params: Option<&'a RawValue>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub suite: String,
    pub seed: u64,
    /// Thread count and output location do not affect results and are not hashed.
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub caps: CapsConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionSpec>,
    pub sweep: Sweep,
    /// Suite parameters with every default filled in.
    pub params: serde_json::Value,
    #[serde(skip)]
    pub source: PathBuf,
    #[serde(skip)]
    pub dir: PathBuf,
}

impl ExperimentConfig {
    /// Typed view of the (already validated) suite parameters.
    pub fn params<P: DeserializeOwned>(&self) -> P {
        serde_json::from_value(self.params.clone()).expect("parameters were validated on load")
    }

    /// Resolves a path relative to the config file's directory.
    pub fn resolve(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.dir.join(path)
        }
    }

    /// Canonical JSON of the resolved configuration (what the manifest hashes).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    (line, col)
}

fn diag(file: &Path, text: &str, line: usize, column: usize, mut message: String) -> Diagnostic {
    // serde_json appends its own position, which is reported separately
    if let Some(i) = message.rfind(" at line ") {
        message.truncate(i);
    }
    Diagnostic {
        file: file.display().to_string(),
        line,
        column,
        message,
        source_line: (line > 0).then(|| text.lines().nth(line - 1).unwrap_or("").to_string()),
    }
}

/// Loads and validates a config. `suite` (from the command line) must agree
/// with the file's `suite` field when both are given.
/// Loads and validates a config. A run manifest is accepted too: its embedded
/// configuration is used, with relative paths resolved against the original
/// config directory.
pub fn load(path: &Path, suite: Option<&str>) -> Result<ExperimentConfig, Diagnostic> {
    let text = std::fs::read_to_string(path).map_err(|e| Diagnostic {
        file: path.display().to_string(),
        line: 0,
        column: 0,
        message: format!("cannot read config: {e}"),
        source_line: None,
    })?;
    if let Ok(serde_json::Value::Object(m)) = serde_json::from_str::<serde_json::Value>(&text) {
        if let (Some(inner), Some(_)) = (m.get("config"), m.get("config_sha256")) {
            let inner = serde_json::to_string_pretty(inner).expect("value serializes");
            let label = PathBuf::from(format!("{}#config", path.display()));
            let mut cfg = parse(&label, &inner, suite)?;
            cfg.dir = m
                .get("config_dir")
                .and_then(|d| d.as_str())
                .map(PathBuf::from)
                .unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
            return Ok(cfg);
        }
    }
    parse(path, &text, suite)
}

pub fn parse(path: &Path, text: &str, suite: Option<&str>) -> Result<ExperimentConfig, Diagnostic> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| diag(path, text, e.line(), e.column(), e.to_string()))?;
    let at_start = |msg: String| diag(path, text, 1, 1, msg);
    let name = match (suite, raw.suite.as_deref()) {
        (Some(a), Some(b)) if a != b => {
            return Err(at_start(format!("config is for suite '{b}' but '{a}' was requested")));
        }
        (Some(a), _) => a.to_string(),
        (None, Some(b)) => b.to_string(),
        (None, None) => return Err(at_start("no suite given on the command line or in the config".into())),
    };
    if !SUITES.contains(&name.as_str()) {
        return Err(at_start(format!("unknown suite '{name}' (expected one of {})", SUITES.join(", "))));
    }
    let (params_text, params_offset) = match &raw.params {
        Some(r) => (r.get().to_string(), r.get().as_ptr() as usize - text.as_ptr() as usize),
        None => ("{}".to_string(), 0),
    };
    let params = crate::suites::validate_params(&name, &params_text).map_err(|e| {
        if raw.params.is_none() {
            return at_start(format!("params: {e}"));
        }
        // Map the position inside the params object back to the file.
        let (pl, pc) = (e.line(), e.column());
        let inner_offset: usize = params_text.split_inclusive('\n').take(pl.saturating_sub(1)).map(str::len).sum::<usize>()
            + pc.saturating_sub(1);
        let (line, col) = line_col(text, params_offset + inner_offset);
        diag(path, text, line, col, format!("params: {e}"))
    })?;
    let cfg = ExperimentConfig {
        suite: name,
        seed: raw.seed,
        threads: raw.threads,
        out: raw.out,
        caps: raw.caps,
        model: raw.model,
        sampler: raw.sampler,
        region: raw.region,
        sweep: raw.sweep,
        params,
        source: path.to_path_buf(),
        dir: match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
            _ => PathBuf::from("."),
        },
    };
    check_ranges(&cfg).map_err(|(key, msg)| {
        let (line, col) = find_key(text, key);
        diag(path, text, line, col, msg)
    })?;
    Ok(cfg)
}

fn find_key(text: &str, key: &str) -> (usize, usize) {
    match text.find(&format!("\"{key}\"")) {
        Some(off) => line_col(text, off),
        None => (1, 1),
    }
}

fn check_ranges(cfg: &ExperimentConfig) -> Result<(), (&'static str, String)> {
    if let Some(b) = &cfg.sweep.beta {
        if b.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(("beta", "sweep.beta values must be finite and >= 0".into()));
        }
    }
    if let Some(h) = &cfg.sweep.h {
        if h.iter().any(|&x| !x.is_finite()) {
            return Err(("h", "sweep.h values must be finite".into()));
        }
    }
    if let Some(l) = &cfg.sweep.l {
        if l.iter().any(|&x| x < 2) {
            return Err(("l", "sweep.l values must be >= 2".into()));
        }
    }
    if let Some(n) = &cfg.sweep.n {
        if n.iter().any(|&x| x < 1) {
            return Err(("n", "sweep.n values must be >= 1".into()));
        }
    }
    if cfg.threads == Some(0) {
        return Err(("threads", "threads must be >= 1".into()));
    }
    if let Some(RegionSpec::MagFraction { eps }) = &cfg.region {
        if !(*eps >= 0.0 && *eps < 1.0) {
            return Err(("eps", "region eps must lie in [0, 1)".into()));
        }
    }
    Ok(())
}
