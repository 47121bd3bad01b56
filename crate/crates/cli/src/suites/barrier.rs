//! Growth of the classical free-energy barrier `log[pi(A) pi(C) / pi(B)]`
//! for Curie-Weiss (collapsed) and the 2D Ising model (enumerated).

use super::SuiteOutput;
use crate::cells;
use crate::config::{ExperimentConfig, ModelSpec, RegionSpec};
use crate::output::Table;
use serde::{Deserialize, Serialize};
use slowmix::classical::{band_cut, curie_weiss_log_barrier, linear_fit, region_measure, MeasureMode, RegionPredicate};
use slowmix::hamiltonians::build_ising_2d;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// 2D Ising side lengths (empty skips the lattice curve).
    #[serde(default = "default_ising_l")]
    pub ising_l: Vec<usize>,
    #[serde(default = "default_min_r2")]
    pub min_r2: f64,
    /// Growth is asserted only for inverse temperatures at or above this.
    #[serde(default = "one")]
    pub assert_min_beta: f64,
    #[serde(default = "default_budget")]
    pub budget: u64,
}

fn default_ising_l() -> Vec<usize> {
    vec![2, 3, 4]
}
fn default_min_r2() -> f64 {
    0.99
}
fn one() -> f64 {
    1.0
}
fn default_budget() -> u64 {
    1 << 26
}

fn ising_log_barrier(l: usize, periodic: bool, beta: f64, eps: f64, budget: u64) -> slowmix::Result<f64> {
    let h0 = build_ising_2d(l, periodic)?;
    let cut = band_cut(l * l, eps);
    let mode = MeasureMode::Exact { budget };
    let a = region_measure(&h0, beta, &RegionPredicate::MagAbove { min: cut }, mode)?;
    let c = region_measure(&h0, beta, &RegionPredicate::MagBelow { max: -cut }, mode)?;
    let b = region_measure(&h0, beta, &RegionPredicate::MagBand { max_abs: cut }, mode)?;
    Ok(a.log_value + c.log_value - b.log_value)
}

pub fn run(cfg: &ExperimentConfig) -> slowmix::Result<SuiteOutput> {
    let p: Params = cfg.params();
    let ns = cfg.sweep.n.clone().unwrap_or((1..=8).map(|k| 50 * k).collect());
    let betas = cfg.sweep.beta.clone().unwrap_or(vec![1.5]);
    let eps = match &cfg.region {
        None => 0.1,
        Some(RegionSpec::MagFraction { eps }) => *eps,
        Some(other) => {
            return Err(slowmix::Error::InvalidParameter(format!(
                "classical-barrier takes a mag_fraction region, got {other:?}"
            )))
        }
    };
    let periodic = matches!(cfg.model, Some(ModelSpec::Ising2d { periodic: true }));
    let mut out = SuiteOutput::new();
    let mut cw = Table::new("curie_weiss", &["n", "beta"]);
    let mut ising = Table::new("ising2d", &["l", "beta"]);
    let mut fits = Table::new("fits", &["model", "beta"]);
    for &beta in &betas {
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let ys: Vec<f64> = ns.iter().map(|&n| curie_weiss_log_barrier(n, beta, eps)).collect();
        for (&n, &y) in ns.iter().zip(&ys) {
            cw.exact(&cells![n, beta], "log_barrier", y);
        }
        if ns.len() >= 2 {
            let (slope, intercept, r2) = linear_fit(&xs, &ys);
            let key = cells!["curie_weiss", beta];
            fits.exact(&key, "slope", slope);
            fits.exact(&key, "intercept", intercept);
            fits.exact(&key, "r2", r2);
            if beta >= p.assert_min_beta && !(slope > 0.0 && r2 > p.min_r2) {
                out.failures.push(format!("curie-weiss beta={beta}: slope {slope:.4}, R^2 {r2:.5}"));
            }
        }
        let mut lx = Vec::new();
        let mut ly = Vec::new();
        for &l in &p.ising_l {
            let y = ising_log_barrier(l, periodic, beta, eps, p.budget)?;
            ising.exact(&cells![l, beta], "log_barrier", y);
            lx.push(l as f64);
            ly.push(y);
        }
        if lx.len() >= 2 {
            let (slope, intercept, r2) = linear_fit(&lx, &ly);
            let key = cells!["ising2d", beta];
            fits.exact(&key, "slope", slope);
            fits.exact(&key, "intercept", intercept);
            fits.exact(&key, "r2", r2);
        }
    }
    out.tables = vec![cw, ising, fits];
    Ok(out)
}
