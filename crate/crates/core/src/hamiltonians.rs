//! Hamiltonian families: diagonal (classical) models written as Z-polynomials,
//! transverse-field quantum models, and Bohr spectrum extraction.

use crate::error::{invalid, Result};
use crate::operator::{check_operator_cap, index_of_spins, spins_of, DenseOperator, EigenSystem, CMat, C64};
use crate::rng;
use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// One term `coef * prod_{i in sites} Z_i`. An empty support is a constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagTerm {
    pub sites: Vec<usize>,
    pub coef: f64,
}

/// A K-SAT literal: variable index and whether it appears negated.
/// Variable value "true" is spin `+1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Ising1d { n: usize, periodic: bool },
    Ising2d { l: usize, periodic: bool },
    CurieWeiss { n: usize },
    PSpin { n: usize, p: usize },
    KSat { clauses: Vec<Vec<Literal>> },
    Custom,
}

/// Hamiltonian diagonal in the Z basis. `energy(sigma) = sum_t coef_t prod sigma_i`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagonalHamiltonian {
    n: usize,
    terms: Vec<DiagTerm>,
    family: Family,
    #[serde(skip)]
    site_terms: Vec<Vec<usize>>,
}

impl DiagonalHamiltonian {
    pub fn new(n: usize, terms: Vec<DiagTerm>) -> Result<Self> {
        Self::with_family(n, terms, Family::Custom)
    }

    fn with_family(n: usize, terms: Vec<DiagTerm>, family: Family) -> Result<Self> {
        if n == 0 {
            return invalid("Hamiltonian needs at least one spin");
        }
        for t in &terms {
            if let Some(&s) = t.sites.iter().find(|&&s| s >= n) {
                return invalid(format!("term support index {s} outside [0, {n})"));
            }
        }
        let mut h = DiagonalHamiltonian {
            n,
            terms,
            family,
            site_terms: Vec::new(),
        };
        h.index_sites();
        Ok(h)
    }

    fn index_sites(&mut self) {
        let mut st = vec![Vec::new(); self.n];
        for (k, t) in self.terms.iter().enumerate() {
            for &s in &t.sites {
                st[s].push(k);
            }
        }
        self.site_terms = st;
    }

    /// Rebuilds the site index after deserialization.
    pub fn reindexed(mut self) -> Self {
        self.index_sites();
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[DiagTerm] {
        &self.terms
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn terms_on_site(&self, site: usize) -> &[usize] {
        &self.site_terms[site]
    }

    /// Evaluates the Z-polynomial term by term.
    pub fn energy_from_terms(&self, spins: &[i8]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.sites.iter().map(|&s| spins[s] as f64).product::<f64>())
            .sum()
    }

    /// Energy oracle. Curie-Weiss and K-SAT use their closed forms.
    pub fn energy(&self, spins: &[i8]) -> f64 {
        match &self.family {
            Family::CurieWeiss { n } => {
                let m: i64 = spins.iter().map(|&s| s as i64).sum();
                -((m * m) as f64) / *n as f64
            }
            Family::KSat { clauses } => clauses
                .iter()
                .filter(|c| c.iter().all(|l| !literal_true(l, spins)))
                .count() as f64,
            _ => self.energy_from_terms(spins),
        }
    }

    pub fn energy_of_index(&self, index: usize) -> f64 {
        self.energy(&spins_of(index, self.n))
    }

    /// `E(sigma with site flipped) - E(sigma)`.
    pub fn flip_delta(&self, spins: &[i8], site: usize) -> f64 {
        match &self.family {
            Family::CurieWeiss { n } => {
                let m: i64 = spins.iter().map(|&s| s as i64).sum();
                let m2 = m - 2 * spins[site] as i64;
                -((m2 * m2 - m * m) as f64) / *n as f64
            }
            Family::KSat { .. } => {
                let mut s = spins.to_vec();
                let before = self.energy(&s);
                s[site] = -s[site];
                self.energy(&s) - before
            }
            _ => {
                -2.0 * self.site_terms[site]
                    .iter()
                    .map(|&k| {
                        let t = &self.terms[k];
                        t.coef * t.sites.iter().map(|&s| spins[s] as f64).product::<f64>()
                    })
                    .sum::<f64>()
            }
        }
    }

    /// All `2^n` diagonal energies.
    pub fn diagonal(&self) -> Result<Vec<f64>> {
        crate::operator::check_enumeration_cap(self.n)?;
        Ok((0..1usize << self.n).map(|i| self.energy_of_index(i)).collect())
    }

    /// Dense diagonal matrix built from the term list (independent of the oracle).
    pub fn to_dense(&self) -> Result<DenseOperator> {
        check_operator_cap(self.n)?;
        let d: Vec<f64> = (0..1usize << self.n)
            .map(|i| self.energy_from_terms(&spins_of(i, self.n)))
            .collect();
        DenseOperator::diagonal(self.n, &d)
    }

    /// Max number of non-constant terms touching one site.
    pub fn max_degree(&self) -> usize {
        self.site_terms.iter().map(|v| v.len()).max().unwrap_or(0)
    }

    pub fn max_coefficient(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| !t.sites.is_empty())
            .fold(0.0f64, |m, t| m.max(t.coef.abs()))
    }

    /// Ground-state energy by enumeration.
    pub fn ground_energy(&self) -> Result<f64> {
        Ok(self.diagonal()?.into_iter().fold(f64::INFINITY, f64::min))
    }
}

fn literal_true(l: &Literal, spins: &[i8]) -> bool {
    (spins[l.var] > 0) != l.negated
}

pub fn build_ising_1d(n: usize, coupling: f64, periodic: bool) -> Result<DiagonalHamiltonian> {
    if n < 2 {
        return invalid("1D Ising chain needs n >= 2");
    }
    let mut terms: Vec<DiagTerm> = (0..n - 1)
        .map(|i| DiagTerm {
            sites: vec![i, i + 1],
            coef: -coupling,
        })
        .collect();
    if periodic && n > 2 {
        terms.push(DiagTerm {
            sites: vec![n - 1, 0],
            coef: -coupling,
        });
    }
    DiagonalHamiltonian::with_family(n, terms, Family::Ising1d { n, periodic })
}

/// Unique nearest-neighbour pairs of an `L x L` lattice, row-major.
pub fn square_lattice_edges(l: usize, periodic: bool) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for r in 0..l {
        for c in 0..l {
            let i = r * l + c;
            if c + 1 < l {
                edges.push((i, i + 1));
            } else if periodic && l > 2 {
                edges.push((i, r * l));
            }
            if r + 1 < l {
                edges.push((i, i + l));
            } else if periodic && l > 2 {
                edges.push((i, c));
            }
        }
    }
    edges
}

pub fn build_ising_2d(l: usize, periodic: bool) -> Result<DiagonalHamiltonian> {
    if l < 2 {
        return invalid("2D Ising needs L >= 2");
    }
    let terms = square_lattice_edges(l, periodic)
        .into_iter()
        .map(|(a, b)| DiagTerm {
            sites: vec![a, b],
            coef: -1.0,
        })
        .collect();
    DiagonalHamiltonian::with_family(l * l, terms, Family::Ising2d { l, periodic })
}

/// `-(1/n) sum_{i,j} Z_i Z_j`, diagonal `i = j` terms included.
pub fn build_curie_weiss(n: usize) -> Result<DiagonalHamiltonian> {
    if n == 0 {
        return invalid("Curie-Weiss needs n >= 1");
    }
    let mut terms = vec![DiagTerm {
        sites: vec![],
        coef: -1.0,
    }];
    for i in 0..n {
        for j in i + 1..n {
            terms.push(DiagTerm {
                sites: vec![i, j],
                coef: -2.0 / n as f64,
            });
        }
    }
    DiagonalHamiltonian::with_family(n, terms, Family::CurieWeiss { n })
}

/// `n^{-(p-1)/2} sum_{i_1 < ... < i_p} J Z...Z` with iid standard normal `J`.
pub fn build_p_spin(n: usize, p: usize, seed: u64) -> Result<DiagonalHamiltonian> {
    if p < 2 || p > n {
        return invalid(format!("p-spin needs 2 <= p <= n (p={p}, n={n})"));
    }
    let mut r = rng::seeded(seed);
    let scale = (n as f64).powf(-((p - 1) as f64) / 2.0);
    let mut terms = Vec::new();
    let mut idx: Vec<usize> = (0..p).collect();
    loop {
        let j: f64 = r.sample(StandardNormal);
        terms.push(DiagTerm {
            sites: idx.clone(),
            coef: scale * j,
        });
        // next combination in lexicographic order
        let mut k = p;
        while k > 0 && idx[k - 1] == n - p + k - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        idx[k - 1] += 1;
        for m in k..p {
            idx[m] = idx[m - 1] + 1;
        }
    }
    DiagonalHamiltonian::with_family(n, terms, Family::PSpin { n, p })
}

/// Random K-SAT with `m` clauses; energy counts violated clauses.
pub fn build_ksat(n: usize, m: usize, k: usize, seed: u64) -> Result<DiagonalHamiltonian> {
    if k == 0 || k > n || m == 0 {
        return invalid(format!("K-SAT needs 1 <= K <= n and m >= 1 (n={n}, m={m}, K={k})"));
    }
    let mut r = rng::seeded(seed);
    let clauses: Vec<Vec<Literal>> = (0..m)
        .map(|_| {
            let mut vars = sample(&mut r, n, k).into_vec();
            vars.sort_unstable();
            vars.into_iter()
                .map(|var| Literal {
                    var,
                    negated: r.random::<bool>(),
                })
                .collect()
        })
        .collect();
    ksat_from_clauses(n, clauses)
}

/// A clause is violated iff every literal is false; its indicator is
/// `prod_l (1 - s_l Z_l) / 2` with `s_l = +1` for a positive literal.
pub fn ksat_from_clauses(n: usize, clauses: Vec<Vec<Literal>>) -> Result<DiagonalHamiltonian> {
    let mut terms = Vec::new();
    for c in &clauses {
        if c.iter().any(|l| l.var >= n) {
            return invalid("clause variable out of range");
        }
        let k = c.len();
        let w = 0.5f64.powi(k as i32);
        for mask in 0usize..1 << k {
            let mut sites = Vec::new();
            let mut coef = w;
            for (b, l) in c.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    sites.push(l.var);
                    coef *= if l.negated { 1.0 } else { -1.0 };
                }
            }
            terms.push(DiagTerm { sites, coef });
        }
    }
    DiagonalHamiltonian::with_family(n, terms, Family::KSat { clauses })
}

/// `H0 - h sum_i X_i` for a diagonal `H0`, kept in matrix-free form.
#[derive(Clone, Debug)]
pub struct TransverseField {
    pub n: usize,
    pub diag: Vec<f64>,
    pub h: f64,
}

impl TransverseField {
    pub fn new(h0: &DiagonalHamiltonian, h: f64) -> Result<Self> {
        if h < 0.0 {
            return invalid("transverse field must be >= 0");
        }
        Ok(TransverseField {
            n: h0.n(),
            diag: h0.diagonal()?,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> Result<DenseOperator> {
        check_operator_cap(self.n)?;
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = C64::new(self.diag[i], 0.0);
            for q in 0..self.n {
                m[(i ^ (1 << q), i)] = C64::new(-self.h, 0.0);
            }
        }
        DenseOperator::new(self.n, m)?.into_hermitian(1e-12)
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        if self.h == 0.0 {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.diag[i] * x[i];
            }
            return;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let mut flips = 0.0;
            for q in 0..self.n {
                flips += x[i ^ (1 << q)];
            }
            *yi = self.diag[i] * x[i] - self.h * flips;
        }
    }

    /// Lower bound on the spectrum (Gershgorin).
    pub fn spectrum_floor(&self) -> f64 {
        self.diag.iter().fold(f64::INFINITY, |m, &v| m.min(v)) - self.h * self.n as f64
    }
}

/// `-sum_<ij> Z_i Z_j - h sum_i X_i` on an open `L x L` lattice, dense.
pub fn build_tfim_2d(l: usize, h: f64) -> Result<DenseOperator> {
    build_tfim_2d_with(l, h, false)
}

pub fn build_tfim_2d_with(l: usize, h: f64, periodic: bool) -> Result<DenseOperator> {
    if l < 2 {
        return invalid("TFIM needs L >= 2");
    }
    check_operator_cap(l * l)?;
    TransverseField::new(&build_ising_2d(l, periodic)?, h)?.to_dense()
}

/// Distinct eigenvalue differences, clustered and closed under negation.
#[derive(Clone, Debug)]
pub struct BohrSpectrum {
    /// Ascending, symmetric about zero, contains 0.
    pub frequencies: Vec<f64>,
    /// `index[g][h]` = frequency index of `E_g - E_h` for eigenvalue clusters `g, h`.
    pub index: Vec<Vec<usize>>,
    /// Cluster id of each eigenvector (position in the eigensystem).
    pub cluster_of: Vec<usize>,
}

impl BohrSpectrum {
    /// Frequency of the ordered eigenpair `(i, j)`, i.e. `E_i - E_j`.
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        self.index[self.cluster_of[i]][self.cluster_of[j]]
    }

    pub fn pair_frequency(&self, i: usize, j: usize) -> f64 {
        self.frequencies[self.pair_index(i, j)]
    }

    pub fn zero_index(&self) -> usize {
        self.frequencies.len() / 2
    }
}

pub fn bohr_tolerance(norm: f64) -> f64 {
    1e-8 * norm.max(1.0)
}

pub fn bohr_spectrum(es: &EigenSystem, tol: f64) -> Result<BohrSpectrum> {
    if !(tol > 0.0) {
        return invalid("Bohr tolerance must be positive");
    }
    let reps: Vec<f64> = es
        .clusters
        .iter()
        .map(|r| es.values[r.clone()].iter().sum::<f64>() / r.len() as f64)
        .collect();
    let g = reps.len();
    let mut diffs: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..g {
        for b in 0..g {
            let d = reps[a] - reps[b];
            if d >= 0.0 {
                diffs.push((d, a, b));
            }
        }
    }
    diffs.sort_by(|x, y| x.0.total_cmp(&y.0));
    // cluster nonnegative differences; the diagonal zeros come first
    let mut pos_clusters: Vec<Vec<(f64, usize, usize)>> = Vec::new();
    for d in diffs {
        match pos_clusters.last_mut() {
            Some(c) if d.0 - c.last().unwrap().0 <= tol => c.push(d),
            _ => pos_clusters.push(vec![d]),
        }
    }
    let m = pos_clusters.len();
    let values: Vec<f64> = pos_clusters
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if k == 0 {
                0.0
            } else {
                c.iter().map(|x| x.0).sum::<f64>() / c.len() as f64
            }
        })
        .collect();
    let mut frequencies: Vec<f64> = values.iter().rev().map(|v| -v).collect();
    frequencies.extend_from_slice(&values[1..]);
    let zero = m - 1;
    let mut index = vec![vec![usize::MAX; g]; g];
    for (k, c) in pos_clusters.iter().enumerate() {
        for &(_, a, b) in c {
            index[a][b] = zero + k;
            index[b][a] = zero - k;
        }
    }
    Ok(BohrSpectrum {
        frequencies,
        index,
        cluster_of: es.cluster_of(),
    })
}

/// Random diagonal 0/1 projector on `n` qubits, each basis state kept with probability `p`.
pub fn random_diagonal_projector(n: usize, p: f64, r: &mut rng::Rng) -> Result<DenseOperator> {
    let members: Vec<usize> = (0..1usize << n).filter(|_| r.random::<f64>() < p).collect();
    DenseOperator::basis_projector(n, members)
}

/// Index of a spin configuration in the computational basis (spin `-1` is bit 1).
pub fn config_index(spins: &[i8]) -> usize {
    index_of_spins(spins)
}
