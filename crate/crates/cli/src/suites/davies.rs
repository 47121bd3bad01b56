//! Fixed-point and KMS symmetry residuals of Davies generators.

use super::SuiteOutput;
use crate::cells;
use crate::output::Table;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use slowmix::hamiltonians::build_tfim_2d;
use slowmix::lindblad::{davies_from_eigen, fixed_point_residual, kms_residual, GammaProfile};
use slowmix::operator::{eig_hermitian, gibbs_state, random_hermitian, CMat, DenseOperator, Pauli, PauliString, C64};
use slowmix::rng;

use crate::config::ExperimentConfig;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default = "default_instances")]
    pub random_instances: usize,
    #[serde(default = "default_max_qubits")]
    pub max_qubits: usize,
    /// Side of an extra TFIM instance (0 skips it).
    #[serde(default = "default_tfim_l")]
    pub tfim_l: usize,
    #[serde(default = "default_field")]
    pub tfim_field: f64,
    #[serde(default = "default_profile")]
    pub profile: GammaProfile,
    #[serde(default = "default_observables")]
    pub observables: usize,
    #[serde(default = "default_fp_tol")]
    pub fixed_point_tol: f64,
    #[serde(default = "default_kms_tol")]
    pub kms_tol: f64,
}

fn default_instances() -> usize {
    30
}
fn default_max_qubits() -> usize {
    4
}
fn default_tfim_l() -> usize {
    2
}
fn default_field() -> f64 {
    1.0
}
fn default_profile() -> GammaProfile {
    GammaProfile::Metropolis
}
fn default_observables() -> usize {
    4
}
fn default_fp_tol() -> f64 {
    1e-9
}
fn default_kms_tol() -> f64 {
    1e-8
}

/// `sum J_ij Z_i Z_j + sum a_i Z_i + sum b_i X_i` with uniform coefficients in [-1, 1].
pub fn random_mixed_hamiltonian(n: usize, r: &mut rng::Rng) -> slowmix::Result<DenseOperator> {
    let d = 1usize << n;
    let mut m = CMat::zeros(d, d);
    let mut add = |p: PauliString, c: f64| -> slowmix::Result<()> {
        m += p.to_dense()?.mat() * C64::new(c, 0.0);
        Ok(())
    };
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<bool>() {
                add(PauliString::on_sites(n, &[i, j], Pauli::Z)?, r.random_range(-1.0..1.0))?;
            }
        }
        add(PauliString::single(n, i, Pauli::Z)?, r.random_range(-1.0..1.0))?;
        add(PauliString::single(n, i, Pauli::X)?, r.random_range(-1.0..1.0))?;
    }
    DenseOperator::new(n, m)?.into_hermitian(1e-12)
}

fn single_qubit_jumps(n: usize) -> slowmix::Result<Vec<PauliString>> {
    let mut out = Vec::new();
    for q in 0..n {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            out.push(PauliString::single(n, q, p)?);
        }
    }
    Ok(out)
}

pub fn run(cfg: &ExperimentConfig) -> slowmix::Result<SuiteOutput> {
    let p: Params = cfg.params();
    let betas = cfg.sweep.beta.clone().unwrap_or(vec![0.5, 2.0]);
    let mut out = SuiteOutput::new();
    let mut instances = Vec::new();
    for i in 0..p.random_instances {
        let seed = out.seed_for(cfg.seed, i, format!("random instance {i}"));
        instances.push((format!("random{i}"), seed));
    }
    if p.tfim_l >= 2 {
        let i = instances.len();
        let seed = out.seed_for(cfg.seed, i, format!("tfim {}x{}", p.tfim_l, p.tfim_l));
        instances.push((format!("tfim{}x{}", p.tfim_l, p.tfim_l), seed));
    }
    let rows = instances
        .par_iter()
        .map(|(name, seed)| -> slowmix::Result<Vec<(Vec<String>, &'static str, f64)>> {
            let mut r = rng::seeded(*seed);
            let h = if name.starts_with("tfim") {
                build_tfim_2d(p.tfim_l, p.tfim_field)?
            } else {
                let n = r.random_range(1..=p.max_qubits.max(1));
                random_mixed_hamiltonian(n, &mut r)?
            };
            let n = h.n_qubits();
            let es = eig_hermitian(&h)?;
            let jumps = single_qubit_jumps(n)?;
            let obs: Vec<CMat> = (0..p.observables)
                .map(|_| random_hermitian(n, &mut r).map(|o| o.into_mat()))
                .collect::<slowmix::Result<_>>()?;
            let mut rows = Vec::new();
            for &beta in &betas {
                let spec = davies_from_eigen(&es, &jumps, beta, p.profile)?;
                let rho = gibbs_state(&es, beta);
                let key = cells![name, n, beta];
                rows.push((key.clone(), "fixed_point_residual", fixed_point_residual(&spec, &rho)));
                rows.push((key, "kms_residual", kms_residual(&spec, &es, beta, &obs)));
            }
            Ok(rows)
        })
        .collect::<slowmix::Result<Vec<_>>>()?;
    let mut table = Table::new("residuals", &["instance", "n", "beta"]);
    for (key, metric, value) in rows.into_iter().flatten() {
        let tol = if metric == "kms_residual" { p.kms_tol } else { p.fixed_point_tol };
        if !(value <= tol) {
            out.failures.push(format!("{} beta={}: {metric} = {value:.3e} > {tol:.1e}", key[0], key[2]));
        }
        table.exact(&key, metric, value);
    }
    out.tables = vec![table];
    Ok(out)
}
