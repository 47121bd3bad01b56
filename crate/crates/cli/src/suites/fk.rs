//! Path-sampling estimates of `<s| e^{-beta H} |s'>` against dense matrix exponentials.

use super::SuiteOutput;
use crate::cells;
use crate::config::{ExperimentConfig, ModelSpec};
use crate::output::Table;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use slowmix::feynman_kac::fk_matrix_element;
use slowmix::hamiltonians::{build_ising_2d, TransverseField};
use slowmix::operator::{eig_hermitian, exp_from_eigen, index_of_spins};
use slowmix::rng;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_z_max")]
    pub z_max: f64,
    /// Also fail when an estimate's relative stderr exceeds this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rel_stderr: Option<f64>,
}

fn default_pairs() -> usize {
    50
}
fn default_samples() -> usize {
    100_000
}
fn default_z_max() -> f64 {
    4.0
}

struct PointResult {
    rows: Vec<(Vec<String>, &'static str, f64, f64)>,
    worst_z: f64,
    worst_rel: f64,
}

pub fn run(cfg: &ExperimentConfig) -> slowmix::Result<SuiteOutput> {
    let p: Params = cfg.params();
    let periodic = matches!(cfg.model, Some(ModelSpec::Ising2d { periodic: true }));
    let ls = cfg.sweep.l.clone().unwrap_or(vec![2]);
    let betas = cfg.sweep.beta.clone().unwrap_or(vec![0.5, 1.0, 2.0]);
    let hs = cfg.sweep.h.clone().unwrap_or(vec![0.0, 0.3, 0.8]);
    let mut out = SuiteOutput::new();
    let mut points = Vec::new();
    for &l in &ls {
        for &beta in &betas {
            for &h in &hs {
                let idx = points.len();
                let seed = out.seed_for(cfg.seed, idx, format!("l={l} beta={beta} h={h}"));
                points.push((l, beta, h, seed));
            }
        }
    }
    let results = points
        .par_iter()
        .map(|&(l, beta, h, seed)| -> slowmix::Result<PointResult> {
            let h0 = build_ising_2d(l, periodic)?;
            let n = l * l;
            let es = eig_hermitian(&TransverseField::new(&h0, h)?.to_dense()?)?;
            let kernel = exp_from_eigen(&es, -beta)?;
            let mut r = rng::seeded(seed);
            let mut res = PointResult {
                rows: Vec::new(),
                worst_z: 0.0,
                worst_rel: 0.0,
            };
            for pair in 0..p.pairs {
                let draw = |r: &mut rng::Rng| -> Vec<i8> { (0..n).map(|_| if r.random::<bool>() { 1 } else { -1 }).collect() };
                let s = draw(&mut r);
                let sp = draw(&mut r);
                let oracle = kernel.mat()[(index_of_spins(&s), index_of_spins(&sp))].re;
                let est = fk_matrix_element(&h0, h, beta, &s, &sp, p.samples, &mut r)?;
                let diff = (est.mean - oracle).abs();
                let z = if est.stderr > 0.0 {
                    diff / est.stderr
                } else if diff <= 1e-12 * oracle.abs().max(1e-300) {
                    0.0
                } else {
                    f64::INFINITY
                };
                let rel = if est.mean != 0.0 { est.relative_stderr() } else { 0.0 };
                res.worst_z = res.worst_z.max(z);
                res.worst_rel = res.worst_rel.max(rel);
                let key = cells![l, beta, h, pair];
                res.rows.push((key.clone(), "fk", est.mean, est.stderr));
                res.rows.push((key.clone(), "oracle", oracle, 0.0));
                res.rows.push((key, "z", z, 0.0));
            }
            Ok(res)
        })
        .collect::<slowmix::Result<Vec<_>>>()?;

    let mut pairs = Table::new("pairs", &["l", "beta", "h", "pair"]);
    let mut summary = Table::new("summary", &["l", "beta", "h"]);
    for (&(l, beta, h, _), res) in points.iter().zip(&results) {
        for (k, m, v, s) in &res.rows {
            pairs.push(k, m, *v, *s);
        }
        summary.exact(&cells![l, beta, h], "max_abs_z", res.worst_z);
        summary.exact(&cells![l, beta, h], "max_rel_stderr", res.worst_rel);
        if !(res.worst_z <= p.z_max) {
            out.failures.push(format!("l={l} beta={beta} h={h}: max |z| = {:.3} > {}", res.worst_z, p.z_max));
        }
        if let Some(cap) = p.max_rel_stderr {
            if res.worst_rel > cap {
                out.failures.push(format!(
                    "l={l} beta={beta} h={h}: relative stderr {:.4} > {cap}",
                    res.worst_rel
                ));
            }
        }
    }
    out.tables = vec![pairs, summary];
    Ok(out)
}
