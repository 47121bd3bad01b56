//! Stabilizer-code spectra, distances and expansion checks.

use super::SuiteOutput;
use crate::cells;
use crate::config::ExperimentConfig;
use crate::output::Table;
use serde::{Deserialize, Serialize};
use slowmix::codes::{
    code_distance, code_from_checks, code_hamiltonian, expansion_check, parse_checks, syndrome_weight_spectrum,
    ExpansionMode, StabilizerCode,
};
use slowmix::operator::{hermitian_eigenvalues, Caps, PauliString};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// `five_qubit`, `repetition3`, or a path to a check file.
    #[serde(default = "default_codes")]
    pub codes: Vec<String>,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    /// Expansion fractions; `d/(2n)` and `d/n` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    /// Random assignments instead of the exhaustive sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_samples: Option<u64>,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default = "default_spectrum_tol")]
    pub spectrum_tol: f64,
}

fn default_codes() -> Vec<String> {
    vec!["repetition3".into(), "five_qubit".into()]
}
fn default_gammas() -> Vec<f64> {
    vec![1.0]
}
fn default_budget() -> u64 {
    1 << 24
}
fn default_spectrum_tol() -> f64 {
    1e-9
}

pub fn builtin(name: &str) -> Option<Vec<&'static str>> {
    match name {
        "five_qubit" => Some(vec!["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"]),
        "repetition3" => Some(vec!["ZZI", "IZZ"]),
        _ => None,
    }
}

fn load_code(cfg: &ExperimentConfig, name: &str) -> slowmix::Result<StabilizerCode> {
    let code = match builtin(name) {
        Some(checks) => code_from_checks(checks.iter().map(|s| PauliString::parse(s)).collect::<slowmix::Result<_>>()?)?,
        None => parse_checks(&std::fs::read_to_string(cfg.resolve(name))?)?,
    };
    code.completed()
}

pub fn run(cfg: &ExperimentConfig) -> slowmix::Result<SuiteOutput> {
    let p: Params = cfg.params();
    let mut out = SuiteOutput::new();
    let mut props = Table::new("codes", &["code"]);
    let mut expansion = Table::new("expansion", &["code", "gamma", "alpha"]);
    for name in &p.codes {
        let code = load_code(cfg, name)?;
        let (n, k) = (code.n(), code.k());
        let d = code_distance(&code, p.budget)?;
        let key = cells![name];
        props.exact(&key, "n", n as f64);
        props.exact(&key, "k", k as f64);
        props.exact(&key, "distance", d as f64);
        props.exact(&key, "max_checks_per_qubit", code.max_checks_per_qubit() as f64);
        if n <= Caps::current().operator_qubits {
            let mut dense = hermitian_eigenvalues(code_hamiltonian(&code)?.mat());
            dense.sort_by(f64::total_cmp);
            let expected = syndrome_weight_spectrum(&code);
            let dev = dense.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            props.exact(&key, "spectrum_max_deviation", dev);
            if !(dev <= p.spectrum_tol) {
                out.failures.push(format!("{name}: dense spectrum deviates from syndrome weights by {dev:.3e}"));
            }
        }
        let alphas = p
            .alphas
            .clone()
            .unwrap_or(vec![d as f64 / (2.0 * n as f64), d as f64 / n as f64]);
        for &gamma in &p.gammas {
            for &alpha in &alphas {
                let mode = match p.random_samples {
                    Some(samples) => {
                        let seed = out.seed_for(cfg.seed, out.seeds.len(), format!("{name} gamma={gamma} alpha={alpha}"));
                        ExpansionMode::Random { samples, seed }
                    }
                    None => ExpansionMode::Exhaustive { budget: p.budget },
                };
                let rep = expansion_check(&code, gamma, alpha, mode)?;
                let key = cells![name, gamma, alpha];
                expansion.exact(&key, "max_weight", rep.max_weight as f64);
                expansion.exact(&key, "holds", rep.holds as u8 as f64);
                expansion.exact(&key, "certified", rep.certified as u8 as f64);
                expansion.exact(&key, "min_ratio", rep.min_ratio);
                expansion.exact(&key, "checked", rep.checked as f64);
                if rep.witness.is_some() {
                    expansion.exact(&key, "witness_weight", rep.witness_weight as f64);
                    expansion.exact(&key, "witness_violations", rep.witness_violations as f64);
                    expansion.exact(&key, "witness_is_logical", rep.witness_is_logical as u8 as f64);
                }
            }
        }
    }
    out.tables = vec![props, expansion];
    Ok(out)
}
