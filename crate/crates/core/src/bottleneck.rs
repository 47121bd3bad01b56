//! Region projectors, distances between regions, ranges of channels and the
//! bottleneck lower bound on mixing times.

use crate::error::{invalid, Error, Result};
use crate::lindblad::{KrausChannel, Transition};
use crate::operator::{
    check_operator_cap, eig_hermitian, exp_scaled, gibbs_state, max_abs, trace_real, CMat, DenseOperator,
    EigenSystem, C64,
};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Distance returned when no path exists.
pub const UNREACHABLE: usize = usize::MAX;

/// Default constant in front of the bottleneck bound.
pub const DEFAULT_BOUND_CONSTANT: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    A,
    B,
    C,
}

#[derive(Clone, Debug)]
enum Repr {
    /// Sorted computational basis indices.
    Diagonal(Vec<usize>),
    General(DenseOperator),
}

#[derive(Clone, Debug)]
pub struct Region {
    n: usize,
    label: RegionLabel,
    repr: Repr,
}

impl Region {
    pub fn diagonal(n: usize, label: RegionLabel, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let d = 1usize << n;
        let mut m: Vec<usize> = members.into_iter().collect();
        m.sort_unstable();
        m.dedup();
        if let Some(&x) = m.last() {
            if x >= d {
                return invalid(format!("basis index {x} outside 2^{n}"));
            }
        }
        Ok(Region {
            n,
            label,
            repr: Repr::Diagonal(m),
        })
    }

    /// Members selected by a predicate on basis indices.
    pub fn from_predicate(n: usize, label: RegionLabel, pred: impl Fn(usize) -> bool) -> Result<Self> {
        crate::operator::check_enumeration_cap(n)?;
        Self::diagonal(n, label, (0..1usize << n).filter(|&i| pred(i)))
    }

    /// Members given as bit strings such as `"0110"` (qubit 0 first).
    pub fn from_bitstrings<S: AsRef<str>>(n: usize, label: RegionLabel, strings: &[S]) -> Result<Self> {
        let mut members = Vec::new();
        for s in strings {
            let s = s.as_ref().trim();
            if s.len() != n || !s.chars().all(|c| c == '0' || c == '1') {
                return Err(Error::Parse(format!("'{s}' is not a {n}-bit string")));
            }
            members.push(usize::from_str_radix(s, 2).expect("validated bit string"));
        }
        Self::diagonal(n, label, members)
    }

    pub fn general(label: RegionLabel, projector: DenseOperator) -> Result<Self> {
        let n = projector.n_qubits();
        let p = projector.into_projector(1e-9)?;
        Ok(Region {
            n,
            label,
            repr: Repr::General(p),
        })
    }

    /// Basis states in neither `a` nor `c`.
    pub fn complement_of(a: &Region, c: &Region, label: RegionLabel) -> Result<Region> {
        let (Some(ma), Some(mc)) = (a.members(), c.members()) else {
            return invalid("complement is only defined for diagonal regions");
        };
        let mut taken = vec![false; 1usize << a.n];
        for &i in ma.iter().chain(mc) {
            taken[i] = true;
        }
        Self::diagonal(a.n, label, (0..taken.len()).filter(|&i| !taken[i]))
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> RegionLabel {
        self.label
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.repr, Repr::Diagonal(_))
    }

    pub fn members(&self) -> Option<&[usize]> {
        match &self.repr {
            Repr::Diagonal(m) => Some(m),
            Repr::General(_) => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        match &self.repr {
            Repr::Diagonal(m) => m.is_empty(),
            Repr::General(p) => trace_real(p.mat()) < 0.5,
        }
    }

    pub fn projector(&self) -> Result<DenseOperator> {
        match &self.repr {
            Repr::Diagonal(m) => DenseOperator::basis_projector(self.n, m.iter().copied()),
            Repr::General(p) => Ok(p.clone()),
        }
    }

    /// Basis strings with nonzero diagonal weight.
    pub fn support(&self) -> Vec<usize> {
        match &self.repr {
            Repr::Diagonal(m) => m.clone(),
            Repr::General(p) => (0..p.dim()).filter(|&i| p.mat()[(i, i)].re > 1e-12).collect(),
        }
    }

    /// `Tr[Pi rho]`.
    pub fn weight(&self, rho: &CMat) -> f64 {
        match &self.repr {
            Repr::Diagonal(m) => m.iter().map(|&i| rho[(i, i)].re).sum(),
            Repr::General(p) => (p.mat() * rho).trace().re,
        }
    }

    /// `Tr[Pi rho_beta]` for a diagonal Hamiltonian given by its energies.
    pub fn gibbs_weight_diagonal(&self, energies: &[f64], beta: f64) -> Result<f64> {
        let Some(m) = self.members() else {
            return invalid("diagonal Gibbs weight needs a diagonal region");
        };
        let emin = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let z: f64 = energies.iter().map(|e| (-beta * (e - emin)).exp()).sum();
        Ok(m.iter().map(|&i| (-beta * (energies[i] - emin)).exp()).sum::<f64>() / z)
    }
}

/// Checks `||Pi_X Pi_Y|| <= 1e-10` for the three pairs.
pub fn check_orthogonal(regions: [&Region; 3]) -> Result<()> {
    for x in 0..3 {
        for y in x + 1..3 {
            let (a, b) = (regions[x], regions[y]);
            let overlap = match (a.members(), b.members()) {
                (Some(ma), Some(mb)) => {
                    let (mut i, mut j) = (0, 0);
                    let mut hit = false;
                    while i < ma.len() && j < mb.len() {
                        if ma[i] == mb[j] {
                            hit = true;
                            break;
                        } else if ma[i] < mb[j] {
                            i += 1;
                        } else {
                            j += 1;
                        }
                    }
                    if hit {
                        1.0
                    } else {
                        0.0
                    }
                }
                _ => crate::operator::op_norm(&(a.projector()?.mat() * b.projector()?.mat())),
            };
            if overlap > 1e-10 {
                return invalid(format!("regions {:?} and {:?} overlap", a.label, b.label));
            }
        }
    }
    Ok(())
}

/// Minimum Hamming distance between supporting basis strings.
pub fn computational_distance(r1: &Region, r2: &Region) -> Result<usize> {
    if r1.n != r2.n {
        return Err(Error::DimensionMismatch {
            expected: r1.n,
            got: r2.n,
        });
    }
    let (s1, s2) = (r1.support(), r2.support());
    if s1.is_empty() || s2.is_empty() {
        return invalid("distance to an empty region");
    }
    let n = r1.n;
    let d = 1usize << n;
    let mut target = vec![false; d];
    for &j in &s2 {
        target[j] = true;
    }
    // multi-source BFS on the hypercube
    let mut dist = vec![usize::MAX; d];
    let mut queue = VecDeque::new();
    for &i in &s1 {
        if target[i] {
            return Ok(0);
        }
        dist[i] = 0;
        queue.push_back(i);
    }
    while let Some(u) = queue.pop_front() {
        for q in 0..n {
            let v = u ^ (1 << q);
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                if target[v] {
                    return Ok(dist[v]);
                }
                queue.push_back(v);
            }
        }
    }
    unreachable!("the hypercube is connected")
}

/// Eigenstates spanned by a region; errors if the region mixes eigenstates
/// partially.
fn eigen_support(r: &Region, es: &EigenSystem) -> Result<Vec<usize>> {
    let p = r.projector()?;
    let d = es.dim();
    let mut out = Vec::new();
    for i in 0..d {
        let v = es.vectors.column(i);
        let w = (v.adjoint() * p.mat() * v)[(0, 0)].re;
        if w > 1.0 - 1e-8 {
            out.push(i);
        } else if w > 1e-8 {
            return invalid(format!(
                "region {:?} overlaps eigenstate {i} with weight {w:.3e}; not eigenbasis-supported",
                r.label
            ));
        }
    }
    Ok(out)
}

fn transition_graph(transitions: &[Transition], d: usize) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); d];
    for t in transitions {
        if !adj[t.from].contains(&t.to) {
            adj[t.from].push(t.to);
        }
    }
    adj
}

fn bfs(adj: &[Vec<usize>], sources: &[usize], limit: usize) -> Vec<usize> {
    let mut dist = vec![UNREACHABLE; adj.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        dist[s] = 0;
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        if dist[u] >= limit {
            continue;
        }
        for &v in &adj[u] {
            if dist[v] == UNREACHABLE {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Fewest transitions leading from an eigenstate of `r1` to one of `r2`;
/// [`UNREACHABLE`] when no path exists.
pub fn jump_distance(transitions: &[Transition], r1: &Region, r2: &Region, es: &EigenSystem) -> Result<usize> {
    let s1 = eigen_support(r1, es)?;
    let s2 = eigen_support(r2, es)?;
    if s1.is_empty() || s2.is_empty() {
        return invalid("distance to an empty region");
    }
    let dist = bfs(&transition_graph(transitions, es.dim()), &s1, UNREACHABLE);
    Ok(s2.iter().map(|&j| dist[j]).min().unwrap_or(UNREACHABLE))
}

/// True when every Kraus operator, written in the eigenbasis, only has
/// entries `(i, j)` with `i` reachable from `j` in at most `k` transitions.
pub fn verify_range_at_most(kraus: &[CMat], transitions: &[Transition], k: usize, es: &EigenSystem) -> bool {
    let d = es.dim();
    let adj = transition_graph(transitions, d);
    let reach: Vec<Vec<usize>> = (0..d).map(|j| bfs(&adj, &[j], k)).collect();
    kraus.iter().all(|m| {
        let mt = es.to_eigenbasis(m);
        let tol = 1e-9 * max_abs(&mt).max(1e-300);
        (0..d).all(|j| (0..d).all(|i| mt[(i, j)].norm() <= tol || reach[j][i] <= k))
    })
}

/// Qubits on which `k` acts nontrivially, at entry tolerance `tol`.
pub fn locality_of_kraus(k: &CMat, n: usize, tol: f64) -> Vec<usize> {
    let d = 1usize << n;
    assert_eq!(k.nrows(), d, "operator dimension must be 2^n");
    (0..n)
        .filter(|&q| {
            let m = 1usize << (n - 1 - q);
            for i in 0..d {
                for j in 0..d {
                    let v = k[(i, j)];
                    if (i & m) != (j & m) {
                        if v.norm() > tol {
                            return true;
                        }
                    } else if i & m == 0 && (v - k[(i | m, j | m)]).norm() > tol {
                        return true;
                    }
                }
            }
            false
        })
        .collect()
}

/// `e^{-beta H/2} Pi_A e^{-beta H/2} / Tr[Pi_A e^{-beta H}]`.
pub fn sigma0_build(h: &DenseOperator, region_a: &Region, beta: f64) -> Result<DenseOperator> {
    sigma0_from_eigen(&eig_hermitian(h)?, region_a, beta)
}

pub fn sigma0_from_eigen(es: &EigenSystem, region_a: &Region, beta: f64) -> Result<DenseOperator> {
    check_operator_cap(es.n_qubits)?;
    let (half, _) = exp_scaled(es, -beta / 2.0);
    let p = region_a.projector()?;
    let m = &half * p.mat() * &half;
    let z = trace_real(&m);
    let (full, _) = exp_scaled(es, -beta);
    if z <= 1e-300 * trace_real(&full) {
        return Err(Error::Overflow(format!(
            "Tr[Pi_A e^(-beta H)] vanishes for region {:?}",
            region_a.label
        )));
    }
    let sigma = (&m + m.adjoint()) * C64::new(0.5 / z, 0.0);
    DenseOperator::new(es.n_qubits, sigma)?.into_density(1e-9)
}

/// `c min(trA trC / trB, trC / eps)`; infinite when both ratios are.
pub fn bottleneck_lower_bound(tr_a: f64, tr_b: f64, tr_c: f64, eps: f64, c: f64) -> f64 {
    let first = if tr_b > 0.0 { tr_a * tr_c / tr_b } else { f64::INFINITY };
    let second = if eps > 0.0 { tr_c / eps } else { f64::INFINITY };
    c * first.min(second)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BottleneckReport {
    pub tr_a: f64,
    pub tr_b: f64,
    pub tr_c: f64,
    pub epsilon: f64,
    pub lower_bound: f64,
    /// `(t, Tr[Pi_C sigma_t], Tr[Pi_B sigma_t])`.
    pub trajectory: Vec<(usize, f64, f64)>,
}

/// Iterates `sigma_t = Phi^t(sigma_0)` and checks at each step
/// `Tr[Pi_C sigma_t] <= Tr[Pi_C sigma_{t-1}] + Tr[Pi_B sigma_{t-1}] + eps` and
/// `Tr[Pi_B sigma_{t-1}] <= Tr[Pi_B rho_beta] / Tr[Pi_A rho_beta]`, both with `slack`.
///
/// `eps` is the perturbation distance to a range-respecting channel (0 for
/// channels with exact range).
#[allow(clippy::too_many_arguments)]
pub fn trajectory_audit(
    channel: &KrausChannel,
    regions: [&Region; 3],
    h: &DenseOperator,
    beta: f64,
    t_max: usize,
    eps: f64,
    slack: f64,
) -> Result<BottleneckReport> {
    let [ra, rb, rc] = regions;
    check_orthogonal(regions)?;
    if channel.trace_preservation_residual() > 1e-9 {
        return invalid("channel is not trace preserving");
    }
    let es = eig_hermitian(h)?;
    let rho = gibbs_state(&es, beta);
    let (tr_a, tr_b, tr_c) = (ra.weight(rho.mat()), rb.weight(rho.mat()), rc.weight(rho.mat()));
    let b_cap = tr_b / tr_a;
    let mut sigma = sigma0_from_eigen(&es, ra, beta)?.into_mat();
    let mut prev = (rc.weight(&sigma), rb.weight(&sigma));
    let mut trajectory = vec![(0, prev.0, prev.1)];
    for t in 1..=t_max {
        if prev.1 > b_cap + slack {
            return Err(Error::AuditViolation {
                step: t - 1,
                detail: format!("Tr[Pi_B sigma] = {:.6e} exceeds trB/trA = {b_cap:.6e}", prev.1),
            });
        }
        sigma = channel.apply(&sigma);
        let cur = (rc.weight(&sigma), rb.weight(&sigma));
        if cur.0 > prev.0 + prev.1 + eps + slack {
            return Err(Error::AuditViolation {
                step: t,
                detail: format!(
                    "Tr[Pi_C sigma] rose from {:.6e} to {:.6e} with Tr[Pi_B sigma] = {:.6e}",
                    prev.0, cur.0, prev.1
                ),
            });
        }
        trajectory.push((t, cur.0, cur.1));
        prev = cur;
    }
    Ok(BottleneckReport {
        tr_a,
        tr_b,
        tr_c,
        epsilon: eps,
        lower_bound: bottleneck_lower_bound(tr_a, tr_b, tr_c, eps, DEFAULT_BOUND_CONSTANT),
        trajectory,
    })
}
