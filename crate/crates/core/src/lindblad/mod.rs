//! Lindbladian Gibbs samplers: Bohr decomposition of jump operators, Davies
//! and Gaussian-filtered generators, first-order evolution, discrete
//! samplers, mixing times and the appendix norm checks.

mod appendix;
mod mixing;
mod superop;

pub use appendix::{
    chen_truncation_error, diamond_upper_bound, lieb_robinson_error, sampled_channel_distance, ChenTails,
    Geometry, LightconeProbe, LocalHamiltonian, LocalTerm,
};
pub use mixing::{
    channel_mixing_time, default_pairs, mixing_time, mixing_time_with_pairs, MixingEstimate, MixingMethod, StatePair,
};
pub use superop::{generator_superop, kraus_superop, superop_blocks, SuperBlock};

use crate::error::{invalid, Error, Result};
use crate::hamiltonians::{bohr_spectrum, bohr_tolerance, BohrSpectrum};
use crate::operator::{
    eig_hermitian, gibbs_state, hermitian_eigenvalues, kron, op_norm, psd_sqrt, trace_norm, CMat, DenseOperator,
    EigenSystem, PauliString, SparseOp, C64, ZERO,
};
use serde::{Deserialize, Serialize};

/// One nonzero matrix element `<psi_to| A^a |psi_from>` in the eigenbasis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub jump: usize,
    pub from: usize,
    pub to: usize,
    pub element: C64,
}

#[derive(Clone, Debug)]
pub struct JumpDecomposition {
    /// Nonzero Bohr blocks `(nu, A_nu)`, ascending in `nu`.
    pub blocks: Vec<(f64, DenseOperator)>,
    pub transitions: Vec<Transition>,
}

impl JumpDecomposition {
    /// Block at frequency `nu` (zero operator when absent).
    pub fn block(&self, nu: f64, tol: f64) -> Option<&DenseOperator> {
        self.blocks.iter().find(|(v, _)| (v - nu).abs() <= tol).map(|(_, b)| b)
    }

    pub fn reassemble(&self, n: usize) -> Result<DenseOperator> {
        let mut acc = DenseOperator::zeros(n)?;
        for (_, b) in &self.blocks {
            acc = acc.add(b)?;
        }
        Ok(acc)
    }
}

/// Matrix-element threshold for membership in the transition set.
pub fn transition_threshold(a_norm: f64) -> f64 {
    1e-10 * a_norm
}

pub fn jump_decompose(es: &EigenSystem, a: &DenseOperator, tol: f64) -> Result<JumpDecomposition> {
    let bohr = bohr_spectrum(es, tol)?;
    jump_decompose_with(es, &bohr, a, 0)
}

pub fn jump_decompose_with(
    es: &EigenSystem,
    bohr: &BohrSpectrum,
    a: &DenseOperator,
    label: usize,
) -> Result<JumpDecomposition> {
    let d = es.dim();
    if a.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.dim(),
        });
    }
    let at = es.to_eigenbasis(a.mat());
    let a_norm = op_norm(a.mat());
    let thr = transition_threshold(a_norm);
    let nf = bohr.frequencies.len();
    let mut parts: Vec<Option<CMat>> = vec![None; nf];
    let mut transitions = Vec::new();
    for j in 0..d {
        for i in 0..d {
            let v = at[(i, j)];
            if v.norm() <= thr {
                continue;
            }
            transitions.push(Transition {
                jump: label,
                from: j,
                to: i,
                element: v,
            });
            let k = bohr.pair_index(i, j);
            parts[k].get_or_insert_with(|| CMat::zeros(d, d))[(i, j)] = v;
        }
    }
    let n = es.n_qubits;
    let mut blocks = Vec::new();
    for (k, p) in parts.into_iter().enumerate() {
        if let Some(p) = p {
            let m = es.from_eigenbasis(&p);
            blocks.push((bohr.frequencies[k], DenseOperator::new(n, m)?));
        }
    }
    Ok(JumpDecomposition { blocks, transitions })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaProfile {
    Metropolis,
    Glauber,
}

impl GammaProfile {
    /// Transition rate; satisfies `gamma(nu) = e^{-beta nu} gamma(-nu)`.
    pub fn rate(self, beta: f64, nu: f64) -> f64 {
        let x = beta * nu;
        match self {
            GammaProfile::Glauber => {
                if x > 0.0 {
                    let e = (-x).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + x.exp())
                }
            }
            GammaProfile::Metropolis => (-x).exp().min(1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Davies,
    Filtered,
    Custom,
}

/// Which jump operator and Bohr frequency a dissipator came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpLabel {
    pub source: usize,
    pub nu: f64,
}

#[derive(Clone, Debug)]
enum Repr {
    Sparse(SparseOp),
    Dense(CMat),
}

/// `L(rho) = -i[G, rho] + sum_k L_k rho L_k^dagger - 1/2 {L_k^dagger L_k, rho}`.
#[derive(Clone, Debug)]
pub struct LindbladianSpec {
    n: usize,
    coherent: DenseOperator,
    jumps: Vec<DenseOperator>,
    labels: Vec<JumpLabel>,
    beta: f64,
    provenance: Provenance,
    reprs: Vec<Repr>,
    decay: CMat,
    coherent_zero: bool,
}

impl LindbladianSpec {
    pub fn new(
        coherent: DenseOperator,
        jumps: Vec<DenseOperator>,
        beta: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        let labels = (0..jumps.len())
            .map(|k| JumpLabel {
                source: k,
                nu: f64::NAN,
            })
            .collect();
        Self::with_labels(coherent, jumps, labels, beta, provenance)
    }

    pub fn with_labels(
        coherent: DenseOperator,
        jumps: Vec<DenseOperator>,
        labels: Vec<JumpLabel>,
        beta: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = coherent.n_qubits();
        let coherent = coherent.into_hermitian(1e-10)?;
        let d = coherent.dim();
        for l in &jumps {
            if l.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: l.dim(),
                });
            }
        }
        let mut decay = CMat::zeros(d, d);
        for l in &jumps {
            decay += l.mat().adjoint() * l.mat();
        }
        let reprs = jumps
            .iter()
            .map(|l| {
                let s = SparseOp::from_dense(l.mat(), 1e-14 * op_norm(l.mat()).max(1e-300));
                if (s.nnz() as f64).powi(2) < 2.0 * (d as f64).powi(3) {
                    Repr::Sparse(s)
                } else {
                    Repr::Dense(l.mat().clone())
                }
            })
            .collect();
        let coherent_zero = coherent.mat().iter().all(|z| *z == ZERO);
        Ok(LindbladianSpec {
            n,
            coherent,
            jumps,
            labels,
            beta,
            provenance,
            reprs,
            decay,
            coherent_zero,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.coherent.dim()
    }

    pub fn coherent(&self) -> &DenseOperator {
        &self.coherent
    }

    pub fn jumps(&self) -> &[DenseOperator] {
        &self.jumps
    }

    pub fn labels(&self) -> &[JumpLabel] {
        &self.labels
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `sum_k L_k^dagger L_k`.
    pub fn decay_operator(&self) -> &CMat {
        &self.decay
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let d = self.dim();
        let mut out = CMat::zeros(d, d);
        if !self.coherent_zero {
            let g = self.coherent.mat();
            out += (g * rho - rho * g) * C64::new(0.0, -1.0);
        }
        for r in &self.reprs {
            match r {
                Repr::Sparse(s) => s.sandwich_into(rho, 1.0, &mut out),
                Repr::Dense(l) => out += l * rho * l.adjoint(),
            }
        }
        out -= (&self.decay * rho + rho * &self.decay) * C64::new(0.5, 0.0);
        out
    }

    /// Heisenberg-picture adjoint `L^dagger(O)`.
    pub fn adjoint_apply(&self, o: &CMat) -> CMat {
        let g = self.coherent.mat();
        let mut out = (g * o - o * g) * C64::new(0.0, 1.0);
        for l in &self.jumps {
            out += l.mat().adjoint() * o * l.mat();
        }
        out -= (&self.decay * o + o * &self.decay) * C64::new(0.5, 0.0);
        out
    }

    /// Extends every operator by an identity on `ancilla` extra qubits.
    pub fn lift_to_ancilla(&self, ancilla: usize) -> Result<LindbladianSpec> {
        let id = CMat::identity(1 << ancilla, 1 << ancilla);
        let n = self.n + ancilla;
        let g = DenseOperator::new(n, kron(self.coherent.mat(), &id))?;
        let jumps = self
            .jumps
            .iter()
            .map(|l| DenseOperator::new(n, kron(l.mat(), &id)))
            .collect::<Result<Vec<_>>>()?;
        LindbladianSpec::with_labels(g, jumps, self.labels.clone(), self.beta, self.provenance)
    }

    /// Same spec with every jump multiplied by `s`.
    pub fn scaled_jumps(&self, s: f64) -> Result<LindbladianSpec> {
        let jumps = self.jumps.iter().map(|l| l.scale(C64::new(s, 0.0))).collect();
        LindbladianSpec::with_labels(self.coherent.clone(), jumps, self.labels.clone(), self.beta, self.provenance)
    }
}

pub fn lindblad_apply(spec: &LindbladianSpec, rho: &DenseOperator) -> Result<DenseOperator> {
    if rho.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: rho.dim(),
        });
    }
    DenseOperator::new(spec.n, spec.apply(rho.mat()))
}

/// Davies generator with dissipators `sqrt(gamma(nu)) A_nu^a`; no coherent part.
pub fn davies_generator(
    h: &DenseOperator,
    jumps: &[PauliString],
    beta: f64,
    profile: GammaProfile,
) -> Result<LindbladianSpec> {
    let es = eig_hermitian(h)?;
    davies_from_eigen(&es, jumps, beta, profile)
}

pub fn davies_from_eigen(
    es: &EigenSystem,
    jumps: &[PauliString],
    beta: f64,
    profile: GammaProfile,
) -> Result<LindbladianSpec> {
    if beta < 0.0 {
        return invalid("beta must be >= 0");
    }
    if jumps.is_empty() {
        return invalid("Davies generator needs at least one jump operator");
    }
    let n = es.n_qubits;
    let bohr = bohr_spectrum(es, bohr_tolerance(es.norm()))?;
    let mut ops = Vec::new();
    let mut labels = Vec::new();
    for (a, p) in jumps.iter().enumerate() {
        if p.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.n() });
        }
        let dec = jump_decompose_with(es, &bohr, &p.to_dense()?, a)?;
        for (nu, block) in dec.blocks {
            let g = profile.rate(beta, nu);
            if g > 0.0 {
                ops.push(block.scale(C64::new(g.sqrt(), 0.0)));
                labels.push(JumpLabel { source: a, nu });
            }
        }
    }
    LindbladianSpec::with_labels(DenseOperator::zeros(n)?, ops, labels, beta, Provenance::Davies)
}

/// Gaussian filter `exp(-beta^2 x^2 / 8)`, normalized to 1 at 0.
pub fn filter_weight(beta: f64, x: f64) -> f64 {
    (-beta * beta * x * x / 8.0).exp()
}

/// `sum_nu fhat(omega - nu) A_nu`.
pub fn filtered_jump(es: &EigenSystem, a: &DenseOperator, omega: f64, beta: f64) -> Result<DenseOperator> {
    if !(beta > 0.0) {
        return invalid("filtered jump needs beta > 0");
    }
    let dec = jump_decompose(es, a, bohr_tolerance(es.norm()))?;
    let mut acc = DenseOperator::zeros(es.n_qubits)?;
    for (nu, b) in &dec.blocks {
        acc = acc.add(&b.scale(C64::new(filter_weight(beta, omega - nu), 0.0)))?;
    }
    Ok(acc)
}

/// Filtered sampler over an `omega` grid with jumps
/// `sqrt(gamma(omega) d_omega) sum_nu fhat(omega - nu) A_nu`. Approximately stationary only.
pub fn filtered_generator(
    h: &DenseOperator,
    jumps: &[PauliString],
    beta: f64,
    omegas: &[f64],
    profile: GammaProfile,
) -> Result<LindbladianSpec> {
    let es = eig_hermitian(h)?;
    if omegas.is_empty() {
        return invalid("omega grid is empty");
    }
    let dw = if omegas.len() > 1 {
        (omegas[omegas.len() - 1] - omegas[0]) / (omegas.len() - 1) as f64
    } else {
        1.0
    };
    let mut ops = Vec::new();
    let mut labels = Vec::new();
    for (a, p) in jumps.iter().enumerate() {
        let ad = p.to_dense()?;
        for &w in omegas {
            let l = filtered_jump(&es, &ad, w, beta)?;
            let g = (profile.rate(beta, w) * dw).sqrt();
            ops.push(l.scale(C64::new(g, 0.0)));
            labels.push(JumpLabel { source: a, nu: w });
        }
    }
    LindbladianSpec::with_labels(DenseOperator::zeros(es.n_qubits)?, ops, labels, beta, Provenance::Filtered)
}

/// `L(rho) = Tr(rho) rho_target - rho`, written with jumps `sqrt(p_i) |i><j|`.
pub fn replacement_generator(target: &DenseOperator) -> Result<LindbladianSpec> {
    let es = eig_hermitian(target)?;
    let d = es.dim();
    let mut ops = Vec::new();
    for i in 0..d {
        let p = es.values[i].max(0.0);
        if p == 0.0 {
            continue;
        }
        for j in 0..d {
            let vi = es.vectors.column(i);
            let vj = es.vectors.column(j);
            let m = vi * vj.adjoint() * C64::new(p.sqrt(), 0.0);
            ops.push(DenseOperator::new(target.n_qubits(), m)?);
        }
    }
    LindbladianSpec::new(DenseOperator::zeros(target.n_qubits())?, ops, f64::NAN, Provenance::Custom)
}

/// `||L(rho_beta)||_1`.
pub fn fixed_point_residual(spec: &LindbladianSpec, rho: &DenseOperator) -> f64 {
    trace_norm(&spec.apply(rho.mat()))
}

/// KMS inner product `Tr[X^dagger rho^{1/2} Y rho^{1/2}]`.
pub fn kms_inner(sqrt_rho: &CMat, x: &CMat, y: &CMat) -> C64 {
    (x.adjoint() * sqrt_rho * y * sqrt_rho).trace()
}

/// Max relative violation of `<L^dag O1, O2> = <O1, L^dag O2>` over the supplied observables.
pub fn kms_residual(spec: &LindbladianSpec, es: &EigenSystem, beta: f64, observables: &[CMat]) -> f64 {
    let rho = gibbs_state(es, beta);
    let rho_es = eig_hermitian(&rho).expect("Gibbs state is Hermitian");
    let s = psd_sqrt(&rho_es);
    let mut worst = 0.0f64;
    for (k, o1) in observables.iter().enumerate() {
        for o2 in observables.iter().skip(k + 1) {
            let lhs = kms_inner(&s, &spec.adjoint_apply(o1), o2);
            let rhs = kms_inner(&s, o1, &spec.adjoint_apply(o2));
            let scale = op_norm(o1) * op_norm(o2);
            worst = worst.max((lhs - rhs).norm() / scale.max(1e-300));
        }
    }
    worst
}

/// `(I + delta L)^{steps}` with `steps = ceil(t / delta)` and step `t / steps`.
/// Positivity is checked at ten checkpoints and at the end.
pub fn evolve(spec: &LindbladianSpec, rho: &DenseOperator, t: f64, delta: f64) -> Result<DenseOperator> {
    if t < 0.0 || !(delta > 0.0) {
        return invalid("evolve needs t >= 0 and delta > 0");
    }
    if rho.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: rho.dim(),
        });
    }
    let steps = (t / delta).ceil() as usize;
    let mut cur = rho.mat().clone();
    if steps > 0 {
        let dt = C64::new(t / steps as f64, 0.0);
        let check_every = (steps / 10).max(1);
        for s in 1..=steps {
            let l = spec.apply(&cur);
            cur += l * dt;
            cur = (&cur + cur.adjoint()) * C64::new(0.5, 0.0);
            if s % check_every == 0 || s == steps {
                check_positive(&cur)?;
            }
        }
    }
    DenseOperator::new(spec.n, cur)?.into_density(1e-7)
}

fn check_positive(m: &CMat) -> Result<()> {
    let min = hermitian_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min);
    if min < -1e-7 {
        return Err(Error::Positivity(min));
    }
    Ok(())
}

/// A channel given by Kraus operators, stored sparse where that is cheaper.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    n: usize,
    kraus: Vec<CMat>,
    reprs: Vec<Repr>,
}

impl KrausChannel {
    pub fn new(n: usize, kraus: Vec<CMat>) -> Result<Self> {
        let d = 1usize << n;
        if kraus.is_empty() {
            return invalid("Kraus list is empty");
        }
        for k in &kraus {
            if k.nrows() != d || k.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: k.nrows() });
            }
        }
        let reprs = kraus
            .iter()
            .map(|k| {
                let s = SparseOp::from_dense(k, 1e-15 * op_norm(k).max(1e-300));
                if (s.nnz() as f64).powi(2) < 2.0 * (d as f64).powi(3) {
                    Repr::Sparse(s)
                } else {
                    Repr::Dense(k.clone())
                }
            })
            .collect();
        Ok(KrausChannel { n, kraus, reprs })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut out = CMat::zeros(rho.nrows(), rho.ncols());
        for r in &self.reprs {
            match r {
                Repr::Sparse(s) => s.sandwich_into(rho, 1.0, &mut out),
                Repr::Dense(k) => out += k * rho * k.adjoint(),
            }
        }
        out
    }

    /// `max |sum K^dagger K - I|`.
    pub fn trace_preservation_residual(&self) -> f64 {
        let d = 1usize << self.n;
        let mut s = -CMat::identity(d, d);
        for k in &self.kraus {
            s += k.adjoint() * k;
        }
        crate::operator::max_abs(&s)
    }
}

/// CPTP one-step sampler with Kraus operators `sqrt(delta) L_k` and
/// `exp(-i delta G) sqrt(I - delta sum_k L_k^dagger L_k)`.
///
/// Agrees with `I + delta L` to first order. Requires `delta ||sum L^dag L|| <= 1`.
/// For Davies generators `rho_beta` is an exact fixed point.
pub fn discrete_sampler(spec: &LindbladianSpec, delta: f64) -> Result<KrausChannel> {
    let knorm = op_norm(spec.decay_operator());
    if !(delta > 0.0) || delta * knorm > 1.0 + 1e-12 {
        return invalid(format!(
            "discrete step delta={delta} needs 0 < delta <= 1/||sum L^dag L|| = {}",
            1.0 / knorm
        ));
    }
    let d = spec.dim();
    let n = spec.n_qubits();
    let rest = DenseOperator::new(n, CMat::identity(d, d) - spec.decay_operator() * C64::new(delta, 0.0))?
        .into_hermitian(1e-9)?;
    let mut m0 = psd_sqrt(&eig_hermitian(&rest)?);
    if !spec.coherent_zero {
        let ges = eig_hermitian(spec.coherent())?;
        m0 = crate::operator::unitary_evolution(&ges, delta) * m0;
    }
    let mut kraus = vec![m0];
    for l in spec.jumps() {
        kraus.push(l.mat() * C64::new(delta.sqrt(), 0.0));
    }
    KrausChannel::new(n, kraus)
}

/// Largest step allowed by [`discrete_sampler`].
pub fn max_discrete_step(spec: &LindbladianSpec) -> f64 {
    1.0 / op_norm(spec.decay_operator()).max(1e-300)
}
