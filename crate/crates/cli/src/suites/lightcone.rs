//! Truncation error of Heisenberg evolution restricted to growing balls on a TFIM chain.

use super::SuiteOutput;
use crate::cells;
use crate::config::ExperimentConfig;
use crate::output::Table;
use serde::{Deserialize, Serialize};
use slowmix::lindblad::{Geometry, LightconeProbe, LocalHamiltonian};
use slowmix::operator::Pauli;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default = "one")]
    pub field: f64,
    /// Site carrying the local observable.
    #[serde(default)]
    pub site: usize,
    #[serde(default = "default_observable")]
    pub observable: char,
    /// Allowed increase between consecutive radii.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_n() -> usize {
    10
}
fn one() -> f64 {
    1.0
}
fn default_observable() -> char {
    'Z'
}
fn default_tol() -> f64 {
    1e-12
}

pub fn run(cfg: &ExperimentConfig) -> slowmix::Result<SuiteOutput> {
    let p: Params = cfg.params();
    if p.site >= p.n {
        return Err(slowmix::Error::QubitOutOfRange { index: p.site, n: p.n });
    }
    let op = Pauli::from_char(p.observable)
        .ok_or_else(|| slowmix::Error::InvalidParameter(format!("unknown observable '{}'", p.observable)))?;
    let h = LocalHamiltonian::tfim_chain(p.n, p.coupling, p.field)?;
    let probe = LightconeProbe::new(&h, &op.matrix(), &[p.site], p.t, Geometry::Chain { n: p.n })?;
    let mut out = SuiteOutput::new();
    let mut table = Table::new("lightcone", &["n", "t", "ell"]);
    let mut last: Option<f64> = None;
    for ell in 0..p.n {
        let err = probe.error(ell)?;
        table.exact(&cells![p.n, p.t, ell], "error", err);
        if let Some(prev) = last {
            if err > prev + p.tol {
                out.failures.push(format!("error rose from {prev:.3e} to {err:.3e} at ell={ell}"));
            }
        }
        last = Some(err);
    }
    out.tables = vec![table];
    Ok(out)
}
