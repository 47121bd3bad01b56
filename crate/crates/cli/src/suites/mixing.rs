//! Discrete-channel mixing times against the bottleneck lower bound on 1D Ising chains.

use super::SuiteOutput;
use crate::cells;
use crate::config::{ExperimentConfig, ModelSpec, RegionSpec, SamplerSpec};
use crate::output::Table;
use serde::{Deserialize, Serialize};
use slowmix::bottleneck::{bottleneck_lower_bound, sigma0_from_eigen, trajectory_audit, Region, RegionLabel};
use slowmix::hamiltonians::build_ising_1d;
use slowmix::lindblad::{
    channel_mixing_time, davies_from_eigen, default_pairs, discrete_sampler, max_discrete_step, GammaProfile,
    StatePair,
};
use slowmix::operator::{eig_hermitian, gibbs_state, spins_of, Pauli, PauliString};
use slowmix::Error;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn default_eps() -> f64 {
    0.25
}
fn default_c() -> f64 {
    0.25
}
fn default_t_max() -> usize {
    200
}
fn default_slack() -> f64 {
    1e-8
}

/// Magnetization regions `A = {m > w}`, `B = {|m| <= w}`, `C = {m < -w}`.
pub fn magnetization_regions(n: usize, w: i64) -> slowmix::Result<[Region; 3]> {
    let mag = |x: usize| spins_of(x, n).iter().map(|&s| s as i64).sum::<i64>();
    Ok([
        Region::from_predicate(n, RegionLabel::A, |x| mag(x) > w)?,
        Region::from_predicate(n, RegionLabel::B, |x| mag(x).abs() <= w)?,
        Region::from_predicate(n, RegionLabel::C, |x| mag(x) < -w)?,
    ])
}

pub fn parse_jumps(n: usize, letters: &str) -> slowmix::Result<Vec<PauliString>> {
    let mut out = Vec::new();
    for c in letters.chars() {
        let p = Pauli::from_char(c)
            .filter(|p| *p != Pauli::I)
            .ok_or_else(|| Error::InvalidParameter(format!("jump letter '{c}' is not one of X, Y, Z")))?;
        for q in 0..n {
            out.push(PauliString::single(n, q, p)?);
        }
    }
    Ok(out)
}

pub fn run(cfg: &ExperimentConfig) -> slowmix::Result<SuiteOutput> {
    let p: Params = cfg.params();
    let (coupling, periodic) = match &cfg.model {
        None => (1.0, false),
        Some(ModelSpec::Ising1d { coupling, periodic }) => (*coupling, *periodic),
        Some(other) => return Err(Error::InvalidParameter(format!("mixing-vs-bound needs an ising_1d model, got {other:?}"))),
    };
    let (profile, letters, delta) = match &cfg.sampler {
        None => (GammaProfile::Metropolis, "XZ".to_string(), None),
        Some(SamplerSpec::Davies { profile, jumps, delta }) => (*profile, jumps.clone(), *delta),
    };
    let ns = cfg.sweep.n.clone().unwrap_or(vec![4, 5, 6]);
    let betas = cfg.sweep.beta.clone().unwrap_or(vec![1.0, 2.0, 3.0]);
    let mut out = SuiteOutput::new();
    let mut table = Table::new("instances", &["n", "beta"]);
    for &n in &ns {
        let w = match &cfg.region {
            None => (n % 2) as i64,
            Some(RegionSpec::MagBand { half_width }) => half_width.unwrap_or((n % 2) as i64),
            Some(RegionSpec::MagFraction { eps }) => (eps * n as f64).floor() as i64,
            Some(other) => return Err(Error::InvalidParameter(format!("mixing-vs-bound needs magnetization regions, got {other:?}"))),
        };
        let h = build_ising_1d(n, coupling, periodic)?.to_dense()?;
        let es = eig_hermitian(&h)?;
        let jumps = parse_jumps(n, &letters)?;
        let [a, b, c] = magnetization_regions(n, w)?;
        for &beta in &betas {
            let key = cells![n, beta];
            let spec = davies_from_eigen(&es, &jumps, beta, profile)?;
            let step = delta.unwrap_or_else(|| max_discrete_step(&spec));
            let ch = discrete_sampler(&spec, step)?;
            let rho = gibbs_state(&es, beta);
            let (ta, tb, tc) = (a.weight(rho.mat()), b.weight(rho.mat()), c.weight(rho.mat()));
            let bound = bottleneck_lower_bound(ta, tb, tc, 0.0, p.c);
            let audit_ok = match trajectory_audit(&ch, [&a, &b, &c], &h, beta, p.t_max, 0.0, p.slack) {
                Ok(_) => true,
                Err(Error::AuditViolation { step, detail }) => {
                    out.failures.push(format!("n={n} beta={beta}: audit violated at step {step}: {detail}"));
                    false
                }
                Err(e) => return Err(e),
            };
            let mut pairs = default_pairs(es.dim());
            pairs.push(StatePair::new(
                "sigma0 vs gibbs",
                sigma0_from_eigen(&es, &a, beta)?.into_mat(),
                rho.mat().clone(),
            ));
            let mix = channel_mixing_time(&ch, p.eps, &pairs)?;
            if !(mix.time >= bound) {
                out.failures.push(format!("n={n} beta={beta}: mixing time {} < bound {bound:.4}", mix.time));
            }
            table.exact(&key, "delta", step);
            table.exact(&key, "tr_a", ta);
            table.exact(&key, "tr_b", tb);
            table.exact(&key, "tr_c", tc);
            table.exact(&key, "lower_bound", bound);
            table.exact(&key, "mixing_steps", mix.time);
            table.exact(&key, "audit_ok", audit_ok as u8 as f64);
        }
    }
    out.tables = vec![table];
    Ok(out)
}
