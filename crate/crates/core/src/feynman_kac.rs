//! Poisson path representation of `<sigma| e^{-beta H} |sigma'>` for
//! `H = H0 - h sum_i X_i` with diagonal `H0`, and the ratio and decoupling
//! checks built on it.
//!
//! Each site flips at the arrivals of a rate-`beta h` Poisson process on
//! `[0, 1]`, conditioned on its final parity. The matrix element is
//! `cosh(beta h)^n tanh(beta h)^{|sigma - sigma'|}` times the conditional mean
//! of `exp(beta * action)`, where the action is `-int_0^1 H0(sigma s(t)) dt`.

use crate::bottleneck::{sigma0_from_eigen, Region};
use crate::error::{invalid, Error, Result};
use crate::hamiltonians::{DiagonalHamiltonian, TransverseField};
use crate::krylov::{log_diag_exp, transverse_log_diagonal};
use crate::lattice::{flip_side, g_function, min_defect_fault_line, FaultLine, SpinConfiguration};
use crate::operator::{check_operator_cap, eig_hermitian, exp_from_eigen, exp_scaled, op_norm, DenseOperator};
use crate::rng::{self, Rng};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

/// Samples per parallel work unit. Each unit has its own rng substream.
const CHUNK: usize = 8192;

/// Per-site flip times on `(0, 1)`, strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonPath {
    rate: f64,
    times: Vec<Vec<f64>>,
}

impl PoissonPath {
    pub fn new(rate: f64, times: Vec<Vec<f64>>) -> Result<Self> {
        for (i, ts) in times.iter().enumerate() {
            if ts.iter().any(|&t| !(t > 0.0 && t < 1.0)) || ts.windows(2).any(|w| w[0] >= w[1]) {
                return invalid(format!("flip times of site {i} must be increasing in (0, 1)"));
            }
        }
        Ok(PoissonPath { rate, times })
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn flip_times(&self, site: usize) -> &[f64] {
        &self.times[site]
    }

    pub fn flip_count(&self, site: usize) -> usize {
        self.times[site].len()
    }

    pub fn parity(&self, site: usize) -> usize {
        self.times[site].len() % 2
    }

    /// `s_i(t) = (-1)^{#flips <= t}`.
    pub fn sign_at(&self, site: usize, t: f64) -> i8 {
        let k = self.times[site].partition_point(|&x| x <= t);
        if k % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// True if the site is flipped at some time in `[0, 1]`.
    pub fn ever_flipped(&self, site: usize) -> bool {
        !self.times[site].is_empty()
    }

    /// The path under `t -> 1 - t`.
    pub fn mirrored(&self) -> PoissonPath {
        PoissonPath {
            rate: self.rate,
            times: self.times.iter().map(|ts| ts.iter().rev().map(|t| 1.0 - t).collect()).collect(),
        }
    }

    /// All flips in time order as `(time, site)`.
    pub fn events(&self) -> Vec<(f64, usize)> {
        let mut ev: Vec<(f64, usize)> = self
            .times
            .iter()
            .enumerate()
            .flat_map(|(i, ts)| ts.iter().map(move |&t| (t, i)))
            .collect();
        ev.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        ev
    }
}

/// Inverse-CDF table for a Poisson count restricted to one parity class
/// (optionally also to `k >= min`).
#[derive(Clone, Debug)]
struct CountTable {
    /// `(k, cumulative probability)`.
    cdf: Vec<(usize, f64)>,
}

impl CountTable {
    fn new(x: f64, parity: usize, min: usize) -> Result<Self> {
        // terms x^k e^{-x} / k! for k of the given parity
        let mut k = parity;
        let mut term = (-x).exp() * if parity == 1 { x } else { 1.0 };
        let mut raw = Vec::new();
        let cap = (x + 40.0 * x.sqrt() + 60.0) as usize;
        loop {
            if k >= min {
                raw.push((k, term));
            }
            let total: f64 = raw.iter().map(|r| r.1).sum();
            if k >= cap || (k as f64 > x && total > 0.0 && term < 1e-17 * total) {
                break;
            }
            term *= x * x / ((k + 1) * (k + 2)) as f64;
            k += 2;
        }
        let total: f64 = raw.iter().map(|r| r.1).sum();
        if !(total > 0.0) {
            return invalid(format!(
                "no flip count of parity {parity} (at least {min}) has positive probability at rate {x}"
            ));
        }
        let mut acc = 0.0;
        let cdf = raw
            .into_iter()
            .map(|(k, w)| {
                acc += w / total;
                (k, acc)
            })
            .collect();
        Ok(CountTable { cdf })
    }

    fn draw(&self, r: &mut Rng) -> usize {
        let u: f64 = r.random();
        self.cdf.iter().find(|c| u < c.1).unwrap_or(self.cdf.last().unwrap()).0
    }
}

/// Precomputed count tables for one rate.
#[derive(Clone, Debug)]
struct PathSampler {
    rate: f64,
    even: Option<CountTable>,
    odd: Option<CountTable>,
    even_positive: Option<CountTable>,
}

impl PathSampler {
    fn new(rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return invalid(format!("flip rate must be finite and >= 0, got {rate}"));
        }
        Ok(PathSampler {
            rate,
            even: CountTable::new(rate, 0, 0).ok(),
            odd: CountTable::new(rate, 1, 0).ok(),
            even_positive: CountTable::new(rate, 0, 2).ok(),
        })
    }

    fn table(&self, parity: usize) -> Result<&CountTable> {
        let t = if parity % 2 == 0 { &self.even } else { &self.odd };
        t.as_ref().ok_or_else(|| {
            Error::InvalidParameter(format!("odd parity cannot be reached at flip rate {}", self.rate))
        })
    }

    fn fill_times(k: usize, out: &mut Vec<f64>, r: &mut Rng) {
        out.clear();
        while out.len() < k {
            let t: f64 = r.random();
            if t > 0.0 {
                out.push(t);
            }
        }
        out.sort_unstable_by(f64::total_cmp);
    }

    fn sample_into(&self, parities: &[usize], times: &mut [Vec<f64>], r: &mut Rng) -> Result<()> {
        for (p, ts) in parities.iter().zip(times.iter_mut()) {
            let k = self.table(*p)?.draw(r);
            Self::fill_times(k, ts, r);
        }
        Ok(())
    }
}

/// Draws a path whose per-site flip counts are Poisson(`rate`) conditioned on
/// `count = parities[i] (mod 2)`.
pub fn sample_conditioned_path(n: usize, rate: f64, parities: &[usize], r: &mut Rng) -> Result<PoissonPath> {
    if parities.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: parities.len(),
        });
    }
    let sampler = PathSampler::new(rate)?;
    let mut times = vec![Vec::new(); n];
    sampler.sample_into(parities, &mut times, r)?;
    Ok(PoissonPath { rate, times })
}

/// `-int_0^1 H0(sigma * s(t)) dt`, evaluated exactly over the merged flip times.
pub fn action_integral(path: &PoissonPath, h0: &DiagonalHamiltonian, sigma: &[i8]) -> Result<f64> {
    if path.n() != h0.n() || sigma.len() != h0.n() {
        return Err(Error::DimensionMismatch {
            expected: h0.n(),
            got: if path.n() != h0.n() { path.n() } else { sigma.len() },
        });
    }
    let mut spins = sigma.to_vec();
    let e0 = h0.energy(sigma);
    Ok(action_from_events(h0, &mut spins, e0, &path.events()))
}

fn action_from_events(h0: &DiagonalHamiltonian, spins: &mut [i8], e0: f64, events: &[(f64, usize)]) -> f64 {
    let mut e = e0;
    let mut last = 0.0;
    let mut integral = 0.0;
    for &(t, site) in events {
        integral += e * (t - last);
        e += h0.flip_delta(spins, site);
        spins[site] = -spins[site];
        last = t;
    }
    integral += e * (1.0 - last);
    -integral
}

fn merge_events(times: &[Vec<f64>], out: &mut Vec<(f64, usize)>) {
    out.clear();
    for (i, ts) in times.iter().enumerate() {
        out.extend(ts.iter().map(|&t| (t, i)));
    }
    out.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
}

/// Streaming `log sum exp` of values and of doubled values.
#[derive(Clone, Copy, Debug)]
struct LogMoments {
    count: u64,
    log_s1: f64,
    log_s2: f64,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

impl LogMoments {
    fn new() -> Self {
        LogMoments {
            count: 0,
            log_s1: f64::NEG_INFINITY,
            log_s2: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, w: f64) {
        self.count += 1;
        self.log_s1 = log_add(self.log_s1, w);
        self.log_s2 = log_add(self.log_s2, 2.0 * w);
    }

    fn merge(self, o: LogMoments) -> LogMoments {
        LogMoments {
            count: self.count + o.count,
            log_s1: log_add(self.log_s1, o.log_s1),
            log_s2: log_add(self.log_s2, o.log_s2),
        }
    }

    /// `(log mean, stderr / mean)`.
    fn log_mean_rel_err(&self) -> (f64, f64) {
        let n = self.count as f64;
        let log_mean = self.log_s1 - n.ln();
        if self.count < 2 {
            return (log_mean, f64::INFINITY);
        }
        // E[w^2] / E[w]^2 - 1, scaled to the unbiased variance
        let ratio = (self.log_s2 - n.ln() - 2.0 * log_mean).exp();
        // below this the excess is accumulated rounding in the log sums
        let excess = if ratio - 1.0 < 1e-12 { 0.0 } else { ratio - 1.0 };
        let var_rel = excess * n / (n - 1.0);
        (log_mean, (var_rel / n).sqrt())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FKEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    /// `cosh(beta h)^n tanh(beta h)^{|sigma - sigma'|}`.
    pub prefactor: f64,
    /// Natural log of `mean`; finite even when `mean` overflows.
    pub log_mean: f64,
}

impl FKEstimate {
    pub fn relative_stderr(&self) -> f64 {
        if self.mean == 0.0 {
            0.0
        } else {
            self.stderr / self.mean
        }
    }
}

fn check_spins(h0: &DiagonalHamiltonian, s: &[i8]) -> Result<()> {
    if s.len() != h0.n() {
        return Err(Error::DimensionMismatch {
            expected: h0.n(),
            got: s.len(),
        });
    }
    if s.iter().any(|&x| x != 1 && x != -1) {
        return invalid("spins must be +1 or -1");
    }
    Ok(())
}

/// Monte Carlo estimate of `<sigma| e^{-beta (H0 - h sum X)} |sigma'>`.
pub fn fk_matrix_element(
    h0: &DiagonalHamiltonian,
    h: f64,
    beta: f64,
    sigma: &[i8],
    sigma_prime: &[i8],
    samples: usize,
    r: &mut Rng,
) -> Result<FKEstimate> {
    check_spins(h0, sigma)?;
    check_spins(h0, sigma_prime)?;
    if samples == 0 {
        return invalid("samples must be >= 1");
    }
    if !(h >= 0.0 && beta >= 0.0) {
        return invalid("beta and h must be >= 0");
    }
    let n = h0.n();
    let x = beta * h;
    let parities: Vec<usize> = sigma.iter().zip(sigma_prime).map(|(a, b)| (a != b) as usize).collect();
    let flips: usize = parities.iter().sum();
    let mut log_pref = n as f64 * x.cosh().ln();
    if flips > 0 {
        log_pref += flips as f64 * x.tanh().ln();
    }
    if flips > 0 && x == 0.0 {
        return Ok(FKEstimate {
            mean: 0.0,
            stderr: 0.0,
            samples,
            prefactor: 0.0,
            log_mean: f64::NEG_INFINITY,
        });
    }
    let sampler = PathSampler::new(x)?;
    let e0 = h0.energy(sigma);
    let seed = r.next_u64();
    let chunks = samples.div_ceil(CHUNK);
    let acc = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<LogMoments> {
            let mut rr = rng::substream(seed, c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut times = vec![Vec::new(); n];
            let mut events = Vec::new();
            let mut spins = sigma.to_vec();
            let mut m = LogMoments::new();
            for _ in 0..count {
                sampler.sample_into(&parities, &mut times, &mut rr)?;
                merge_events(&times, &mut events);
                spins.copy_from_slice(sigma);
                m.push(beta * action_from_events(h0, &mut spins, e0, &events));
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(LogMoments::new(), LogMoments::merge);
    let (log_avg, rel) = acc.log_mean_rel_err();
    let log_mean = log_avg + log_pref;
    let mean = log_mean.exp();
    Ok(FKEstimate {
        mean,
        stderr: mean * rel,
        samples,
        prefactor: log_pref.exp(),
        log_mean,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HBoundReport {
    /// `|log(Tr[P e^{-beta H}] / Tr[P e^{-beta H0}])|`.
    pub log_ratio: f64,
    pub bound: f64,
    /// `d * max |coefficient|`.
    pub c: f64,
    /// Maximum number of terms on one site.
    pub degree: usize,
    pub pass: bool,
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + v.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

/// Compares `Tr[P e^{-beta H}]` with its `h = 0` value against
/// `(h beta e^{beta c})^2 n`, where `c = d max|coef|`.
pub fn hbound_audit(h0: &DiagonalHamiltonian, h: f64, beta: f64, region: &Region) -> Result<HBoundReport> {
    if !(h >= 0.0 && h * beta < 1.0) {
        return Err(Error::OutsideWindow(format!(
            "the field bound needs 0 <= h < 1/beta, got h = {h}, beta = {beta}"
        )));
    }
    let n = h0.n();
    check_operator_cap(n)?;
    let members = region
        .members()
        .ok_or_else(|| Error::InvalidParameter("field bound needs a diagonal region".into()))?;
    if region.n_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: region.n_qubits(),
        });
    }
    let degree = h0.max_degree();
    let c = degree as f64 * h0.max_coefficient();
    let bound = (h * beta * (beta * c).exp()).powi(2) * n as f64;
    if members.is_empty() {
        return invalid("field bound needs a nonempty region");
    }
    let tf = TransverseField::new(h0, h)?;
    let quantum = transverse_log_diagonal(&tf, beta)?;
    let log_q = log_sum_exp(members.iter().map(|&i| quantum[i]));
    let log_c = log_sum_exp(members.iter().map(|&i| -beta * tf.diag[i]));
    let log_ratio = (log_q - log_c).abs();
    Ok(HBoundReport {
        log_ratio,
        bound,
        c,
        degree,
        pass: log_ratio <= bound,
    })
}

/// True if `h` is real with nonpositive off-diagonal entries (up to `tol`),
/// which makes `e^{-beta h}` entrywise nonnegative.
pub fn is_stoquastic(h: &DenseOperator, tol: f64) -> bool {
    let m = h.mat();
    let d = m.nrows();
    (0..d).all(|i| (0..d).all(|j| m[(i, j)].im.abs() <= tol && (i == j || m[(i, j)].re <= tol)))
}

#[derive(Clone, Debug, Serialize)]
pub struct DecouplingReport {
    pub delta: f64,
    /// `||e^{Delta beta H/2} P_A e^{-Delta beta H/2} P_C||`.
    pub norm_term: f64,
    /// `Tr[P_B e^{-beta H}] / Tr[P_A e^{-beta H}]`.
    pub b_ratio: f64,
    /// `(norm_term + b_ratio) / Delta`.
    pub bound: f64,
    /// `Tr[P_C sigma_0]`.
    pub exact: f64,
}

/// Evaluates both sides of the discretized decoupling inequality densely.
pub fn decoupling_estimate(
    h: &DenseOperator,
    region_a: &Region,
    region_c: &Region,
    beta: f64,
    delta: f64,
) -> Result<DecouplingReport> {
    let steps = 1.0 / delta;
    if !(delta > 0.0 && delta <= 1.0) || (steps - steps.round()).abs() > 1e-9 {
        return invalid(format!("1/Delta must be a positive integer, got Delta = {delta}"));
    }
    if !region_a.is_diagonal() || !region_c.is_diagonal() {
        return invalid("decoupling needs diagonal regions");
    }
    if !is_stoquastic(h, 1e-12) {
        return Err(Error::Unsupported(
            "decoupling needs a stoquastic Hamiltonian (real, nonpositive off-diagonal)".into(),
        ));
    }
    let es = eig_hermitian(h)?;
    let pa = region_a.projector()?;
    let pc = region_c.projector()?;
    let up = exp_from_eigen(&es, delta * beta / 2.0)?;
    let down = exp_from_eigen(&es, -delta * beta / 2.0)?;
    let norm_term = op_norm(&(up.mat() * pa.mat() * down.mat() * pc.mat()));
    let (g, _) = exp_scaled(&es, -beta);
    let tr = |p: &DenseOperator| (p.mat() * &g).trace().re;
    let ta = tr(&pa);
    let tc = tr(&pc);
    let total = g.trace().re;
    let b_ratio = ((total - ta - tc).max(0.0)) / ta;
    let bound = (norm_term + b_ratio) / delta;
    let s0 = sigma0_from_eigen(&es, region_a, beta)?;
    let exact = region_c.weight(s0.mat());
    if exact > bound + 1e-9 {
        return Err(Error::AuditViolation {
            step: 0,
            detail: format!("Tr[P_C sigma_0] = {exact:.6e} exceeds decoupling bound {bound:.6e}"),
        });
    }
    Ok(DecouplingReport {
        delta,
        norm_term,
        b_ratio,
        bound,
        exact,
    })
}

/// Closed-form TFIM bound on `||e^{Delta beta H/2} P_A e^{-Delta beta H/2} P_C||`:
/// `2 e^{2 Delta beta (1+h) n} (Delta beta h n / 2)^{c0 sqrt(n) / 2}`.
/// Valid for `Delta beta h n <= 1` and `c0 sqrt(n) >= 6`.
pub fn tfim_norm_bound(delta: f64, beta: f64, h: f64, n: usize, c0: f64) -> Result<f64> {
    let nf = n as f64;
    let x = delta * beta * h * nf;
    if x > 1.0 {
        return Err(Error::OutsideWindow(format!("Delta beta h n = {x} exceeds 1")));
    }
    Ok(2.0 * (2.0 * delta * beta * (1.0 + h) * nf).exp() * (x / 2.0).powf(c0 * nf.sqrt() / 2.0))
}

/// Sufficient-condition bound `2 exp[n((2 delta + (3+|h|) beta)/2 + d log|h|)]`
/// on `Tr[P_C sigma_0]` for Hamming-separated regions, with the normalizations
/// `||H0|| = n` and `||V|| = n` reported rather than enforced.
#[derive(Clone, Debug, Serialize)]
pub struct SeparatedDecoupling {
    pub h0_norm: f64,
    pub v_norm: f64,
    pub normalized: bool,
    pub bound: f64,
}

pub fn separated_decoupling_bound(
    h0: &DiagonalHamiltonian,
    h: f64,
    beta: f64,
    log_weight_a: f64,
    d: f64,
) -> Result<SeparatedDecoupling> {
    if h.abs() > 0.5 {
        return Err(Error::OutsideWindow(format!("needs |h| <= 1/2, got {h}")));
    }
    let n = h0.n() as f64;
    let diag = h0.diagonal()?;
    let h0_norm = diag.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let v_norm = n;
    let dl = (-log_weight_a / n).max(0.0);
    let bound = 2.0 * (n * ((2.0 * dl + (3.0 + h.abs()) * beta) / 2.0 + d * h.abs().ln())).exp();
    Ok(SeparatedDecoupling {
        h0_norm,
        v_norm,
        normalized: (h0_norm - n).abs() <= 1e-9 * n,
        bound,
    })
}

/// How the diagonal elements in a fault-ratio audit are evaluated.
#[derive(Clone, Copy, Debug)]
pub enum RatioMode {
    /// Lanczos quadrature on the full Hilbert space (`n <= 16`).
    Exact,
    /// Shared-path Monte Carlo.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct FaultRatioReport {
    /// `<sigma'| e^{-beta H} |sigma'> / <sigma| e^{-beta H} |sigma>`.
    pub ratio: f64,
    /// Delta-method standard error of `ln ratio` (zero in exact mode).
    pub log_stderr: f64,
    pub lower: f64,
    pub upper: f64,
    pub length: usize,
    pub defects: usize,
    pub pass: bool,
}

/// Bracket `[e^{2 beta (l(1+g(-14)) - 2k)}, e^{2 beta (l(1+g(14)) - 2k)}]`.
pub fn fault_ratio_bracket(beta: f64, h: f64, length: usize, defects: usize) -> (f64, f64) {
    let l = length as f64;
    let k = defects as f64;
    let lo = 2.0 * beta * (l * (1.0 + g_function(beta, h, -14.0)) - 2.0 * k);
    let hi = 2.0 * beta * (l * (1.0 + g_function(beta, h, 14.0)) - 2.0 * k);
    (lo.exp(), hi.exp())
}

/// Compares the diagonal Gibbs weights of `sigma` and of `sigma` with one side
/// of a fault line flipped, on the open `L x L` TFIM. Without an explicit line
/// the minimum-defect one is used.
pub fn fault_ratio_audit(
    sigma: &SpinConfiguration,
    fault: Option<&FaultLine>,
    h: f64,
    beta: f64,
    mode: RatioMode,
) -> Result<FaultRatioReport> {
    let l = sigma.side();
    let found;
    let fault = match fault {
        Some(f) => f,
        None => {
            found = min_defect_fault_line(sigma, usize::MAX)
                .ok_or_else(|| Error::InvalidParameter("configuration has no fault line".into()))?;
            &found
        }
    };
    fault.validate(sigma)?;
    let flipped = flip_side(sigma, fault)?;
    let h0 = crate::hamiltonians::build_ising_2d(l, false)?;
    let (log_ratio, log_stderr) = match mode {
        RatioMode::Exact => {
            crate::operator::check_enumeration_cap(l * l)?;
            if l * l > 16 {
                return Err(Error::DimensionCap {
                    what: "exact fault ratio",
                    qubits: l * l,
                    cap: 16,
                });
            }
            let tf = TransverseField::new(&h0, h)?;
            let apply = |x: &[f64], y: &mut [f64]| tf.apply(x, y);
            let a = log_diag_exp(tf.dim(), &apply, flipped.index(), beta, 1e-12, 400)?;
            let b = log_diag_exp(tf.dim(), &apply, sigma.index(), beta, 1e-12, 400)?;
            (a - b, 0.0)
        }
        RatioMode::MonteCarlo { samples, seed } => {
            shared_path_log_ratio(&h0, h, beta, flipped.spins(), sigma.spins(), samples, seed)?
        }
    };
    let (lower, upper) = fault_ratio_bracket(beta, h, fault.length, fault.defects);
    let ratio = log_ratio.exp();
    let slack = 1e-9 * (1.0 + log_ratio.abs());
    Ok(FaultRatioReport {
        ratio,
        log_stderr,
        lower,
        upper,
        length: fault.length,
        defects: fault.defects,
        pass: log_ratio >= lower.ln() - slack && log_ratio <= upper.ln() + slack,
    })
}

/// Streaming sums for a ratio of two means estimated on shared paths.
#[derive(Clone, Copy, Debug)]
struct PairMoments {
    count: u64,
    a: f64,
    b: f64,
    aa: f64,
    bb: f64,
    ab: f64,
}

impl PairMoments {
    fn new() -> Self {
        let z = f64::NEG_INFINITY;
        PairMoments {
            count: 0,
            a: z,
            b: z,
            aa: z,
            bb: z,
            ab: z,
        }
    }

    fn push(&mut self, x: f64, y: f64) {
        self.count += 1;
        self.a = log_add(self.a, x);
        self.b = log_add(self.b, y);
        self.aa = log_add(self.aa, 2.0 * x);
        self.bb = log_add(self.bb, 2.0 * y);
        self.ab = log_add(self.ab, x + y);
    }

    fn merge(self, o: Self) -> Self {
        PairMoments {
            count: self.count + o.count,
            a: log_add(self.a, o.a),
            b: log_add(self.b, o.b),
            aa: log_add(self.aa, o.aa),
            bb: log_add(self.bb, o.bb),
            ab: log_add(self.ab, o.ab),
        }
    }

    /// `(ln(mean_a / mean_b), delta-method stderr)`.
    fn log_ratio(&self) -> (f64, f64) {
        let n = self.count as f64;
        let lr = self.a - self.b;
        if self.count < 2 {
            return (lr, f64::INFINITY);
        }
        let ln = n.ln();
        let (ma, mb) = (self.a - ln, self.b - ln);
        let va = (self.aa - ln - 2.0 * ma).exp() - 1.0;
        let vb = (self.bb - ln - 2.0 * mb).exp() - 1.0;
        let cab = (self.ab - ln - ma - mb).exp() - 1.0;
        let var = (va + vb - 2.0 * cab).max(0.0) / (n - 1.0);
        (lr, var.sqrt())
    }
}

fn shared_path_log_ratio(
    h0: &DiagonalHamiltonian,
    h: f64,
    beta: f64,
    num: &[i8],
    den: &[i8],
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return invalid("Monte Carlo ratio needs at least 2 samples");
    }
    let n = h0.n();
    let sampler = PathSampler::new(beta * h)?;
    let parities = vec![0usize; n];
    let (ea, eb) = (h0.energy(num), h0.energy(den));
    let acc = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<PairMoments> {
            let mut rr = rng::substream(seed, c as u64);
            let mut times = vec![Vec::new(); n];
            let mut events = Vec::new();
            let mut sa = num.to_vec();
            let mut sb = den.to_vec();
            let mut m = PairMoments::new();
            for _ in 0..CHUNK.min(samples - c * CHUNK) {
                sampler.sample_into(&parities, &mut times, &mut rr)?;
                merge_events(&times, &mut events);
                sa.copy_from_slice(num);
                sb.copy_from_slice(den);
                let x = beta * action_from_events(h0, &mut sa, ea, &events);
                let y = beta * action_from_events(h0, &mut sb, eb, &events);
                m.push(x, y);
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(PairMoments::new(), PairMoments::merge);
    Ok(acc.log_ratio())
}

/// Pathwise ratio of exponentiated actions for `sigma` with one side of a
/// fault line flipped versus `sigma`, and its bracket
/// `[2 beta (l - 2k - 6m), 2 beta (l - 2k + 6m)]` in log form, where `m` counts
/// line-adjacent sites flipped at any time.
#[derive(Clone, Debug, Serialize)]
pub struct MidRatioCheck {
    pub log_ratio: f64,
    pub log_lower: f64,
    pub log_upper: f64,
    pub touched: usize,
    pub pass: bool,
}

pub fn midratio_check(
    sigma: &SpinConfiguration,
    fault: &FaultLine,
    path: &PoissonPath,
    beta: f64,
) -> Result<MidRatioCheck> {
    let l = sigma.side();
    let h0 = crate::hamiltonians::build_ising_2d(l, false)?;
    let flipped = flip_side(sigma, fault)?;
    let a = action_integral(path, &h0, flipped.spins())?;
    let b = action_integral(path, &h0, sigma.spins())?;
    let touched = fault.adjacent_sites(l).into_iter().filter(|&s| path.ever_flipped(s)).count();
    let base = fault.length as f64 - 2.0 * fault.defects as f64;
    let log_lower = 2.0 * beta * (base - 6.0 * touched as f64);
    let log_upper = 2.0 * beta * (base + 6.0 * touched as f64);
    let log_ratio = beta * (a - b);
    let slack = 1e-9 * (1.0 + log_ratio.abs());
    Ok(MidRatioCheck {
        log_ratio,
        log_lower,
        log_upper,
        touched,
        pass: log_ratio >= log_lower - slack && log_ratio <= log_upper + slack,
    })
}

/// Conditional path average of `exp(beta * action)` for `sigma` given that
/// exactly `m` of the sites in `boundary` flip at some time (all parities even).
/// Stratified: the `m` sites are a uniform subset, each with an even positive
/// count; the other boundary sites never flip.
pub fn conditional_path_average(
    h0: &DiagonalHamiltonian,
    h: f64,
    beta: f64,
    sigma: &[i8],
    boundary: &[usize],
    m: usize,
    samples: usize,
    seed: u64,
) -> Result<FKEstimate> {
    check_spins(h0, sigma)?;
    if m > boundary.len() {
        return invalid(format!("cannot flip {m} of {} boundary sites", boundary.len()));
    }
    if samples == 0 {
        return invalid("samples must be >= 1");
    }
    let n = h0.n();
    let sampler = PathSampler::new(beta * h)?;
    let positive = match (&sampler.even_positive, m) {
        (_, 0) => None,
        (Some(t), _) => Some(t.clone()),
        (None, _) => return invalid("no positive even flip count at zero rate"),
    };
    let mut in_boundary = vec![false; n];
    for &s in boundary {
        if s >= n {
            return Err(Error::QubitOutOfRange { index: s, n });
        }
        in_boundary[s] = true;
    }
    let even = sampler.table(0)?.clone();
    let e0 = h0.energy(sigma);
    let acc = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rr = rng::substream(seed, c as u64);
            let mut times = vec![Vec::new(); n];
            let mut events = Vec::new();
            let mut spins = sigma.to_vec();
            let mut acc = LogMoments::new();
            for _ in 0..CHUNK.min(samples - c * CHUNK) {
                let chosen = rand::seq::index::sample(&mut rr, boundary.len(), m);
                let mut pick = vec![false; n];
                for k in chosen.iter() {
                    pick[boundary[k]] = true;
                }
                for i in 0..n {
                    let k = if pick[i] {
                        positive.as_ref().unwrap().draw(&mut rr)
                    } else if in_boundary[i] {
                        0
                    } else {
                        even.draw(&mut rr)
                    };
                    PathSampler::fill_times(k, &mut times[i], &mut rr);
                }
                merge_events(&times, &mut events);
                spins.copy_from_slice(sigma);
                acc.push(beta * action_from_events(h0, &mut spins, e0, &events));
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(LogMoments::new(), LogMoments::merge);
    let (log_mean, rel) = acc.log_mean_rel_err();
    let mean = log_mean.exp();
    Ok(FKEstimate {
        mean,
        stderr: mean * rel,
        samples,
        prefactor: 1.0,
        log_mean,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StratumCheck {
    pub m: usize,
    /// `f_m / f_0`.
    pub ratio: f64,
    /// Combined relative standard error of the ratio.
    pub rel_stderr: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

/// Checks `f_m / f_0` against `[e^{-8 beta m} (1 - 5 s), e^{8 beta m} (1 + 5 s)]`
/// where `s` is the estimated relative standard error.
pub fn stratum_check(
    h0: &DiagonalHamiltonian,
    h: f64,
    beta: f64,
    sigma: &[i8],
    boundary: &[usize],
    m: usize,
    samples: usize,
    seed: u64,
) -> Result<StratumCheck> {
    let f0 = conditional_path_average(h0, h, beta, sigma, boundary, 0, samples, rng::derive_seed(seed, 0))?;
    let fm = conditional_path_average(h0, h, beta, sigma, boundary, m, samples, rng::derive_seed(seed, m as u64))?;
    let ratio = (fm.log_mean - f0.log_mean).exp();
    let s = (fm.relative_stderr().powi(2) + f0.relative_stderr().powi(2)).sqrt();
    let mf = m as f64;
    let lower = (-8.0 * beta * mf).exp() * (1.0 - 5.0 * s);
    let upper = (8.0 * beta * mf).exp() * (1.0 + 5.0 * s);
    Ok(StratumCheck {
        m,
        ratio,
        rel_stderr: s,
        lower,
        upper,
        pass: ratio >= lower && ratio <= upper,
    })
}

/// `tr(A P B) - tr(A B)` for a diagonal projector given by its 0/1 mask.
/// Nonpositive whenever `A` and `B` are entrywise nonnegative.
pub fn projector_insertion_gap(a: &DMatrix<f64>, b: &DMatrix<f64>, mask: &[bool]) -> Result<f64> {
    let d = a.nrows();
    if a.ncols() != d || b.nrows() != d || b.ncols() != d || mask.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: mask.len(),
        });
    }
    let mut with = 0.0;
    let mut without = 0.0;
    for i in 0..d {
        for k in 0..d {
            let t = a[(i, k)] * b[(k, i)];
            without += t;
            if mask[k] {
                with += t;
            }
        }
    }
    Ok(with - without)
}

fn psd_power(m: &DMatrix<f64>, p: f64) -> (SymmetricEigen<f64, nalgebra::Dyn>, Vec<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let pw = eig.eigenvalues.iter().map(|&l| l.max(0.0).powf(p)).collect();
    (eig, pw)
}

/// `Tr((A P A)^g)^{1/g} - Tr(P A^{2g})^{1/g}` for symmetric PSD `A`; nonpositive
/// when every power of `A` is entrywise nonnegative and `g >= 1`.
pub fn sandwich_power_gap(a: &DMatrix<f64>, mask: &[bool], gamma: f64) -> Result<f64> {
    let d = a.nrows();
    if mask.len() != d || a.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: mask.len(),
        });
    }
    if gamma < 1.0 {
        return invalid(format!("exponent must be >= 1, got {gamma}"));
    }
    let p = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        mask.iter().map(|&b| if b { 1.0 } else { 0.0 }),
    ));
    let apa = a * &p * a;
    let apa = (&apa + apa.transpose()) * 0.5;
    let (_, lhs_pw) = psd_power(&apa, gamma);
    let lhs: f64 = lhs_pw.iter().sum();
    let (eig, pw) = psd_power(a, 2.0 * gamma);
    let mut rhs = 0.0;
    for i in (0..d).filter(|&i| mask[i]) {
        rhs += (0..d).map(|k| eig.eigenvectors[(i, k)].powi(2) * pw[k]).sum::<f64>();
    }
    Ok(lhs.max(0.0).powf(1.0 / gamma) - rhs.max(0.0).powf(1.0 / gamma))
}
