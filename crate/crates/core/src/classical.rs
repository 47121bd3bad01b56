//! Single-site Metropolis and Glauber chains for diagonal Hamiltonians, and
//! exact or sampled Gibbs measures of named configuration regions.

use crate::error::{invalid, Error, Result};
use crate::hamiltonians::{DiagonalHamiltonian, Family};
use crate::lattice::{min_defect_fault_line, SpinConfiguration};
use crate::operator::spins_of;
use crate::rng::{self, Rng};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateRule {
    Metropolis,
    Glauber,
}

/// Probability of accepting a proposed flip with energy change `de`.
pub fn acceptance_probability(rule: UpdateRule, beta: f64, de: f64) -> f64 {
    match rule {
        UpdateRule::Metropolis => (-beta * de).exp().min(1.0),
        UpdateRule::Glauber => {
            let x = beta * de;
            if x > 0.0 {
                let e = (-x).exp();
                e / (1.0 + e)
            } else {
                1.0 / (1.0 + x.exp())
            }
        }
    }
}

/// Spins with cached energy and magnetization.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    spins: Vec<i8>,
    energy: f64,
    magnetization: i64,
}

impl ChainState {
    pub fn new(h0: &DiagonalHamiltonian, spins: Vec<i8>) -> Result<Self> {
        if spins.len() != h0.n() {
            return Err(Error::DimensionMismatch {
                expected: h0.n(),
                got: spins.len(),
            });
        }
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return invalid("spins must be +1 or -1");
        }
        Ok(ChainState {
            energy: h0.energy(&spins),
            magnetization: spins.iter().map(|&s| s as i64).sum(),
            spins,
        })
    }

    pub fn random(h0: &DiagonalHamiltonian, r: &mut Rng) -> Self {
        let spins = (0..h0.n()).map(|_| if r.random::<bool>() { 1 } else { -1 }).collect();
        ChainState::new(h0, spins).unwrap()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn magnetization(&self) -> i64 {
        self.magnetization
    }

    /// `|cached - recomputed|` energy.
    pub fn energy_drift(&self, h0: &DiagonalHamiltonian) -> f64 {
        (self.energy - h0.energy(&self.spins)).abs()
    }

    fn flip_delta(&self, h0: &DiagonalHamiltonian, site: usize) -> f64 {
        match h0.family() {
            Family::CurieWeiss { n } => {
                let m = self.magnetization;
                let m2 = m - 2 * self.spins[site] as i64;
                -((m2 * m2 - m * m) as f64) / *n as f64
            }
            _ => h0.flip_delta(&self.spins, site),
        }
    }

    fn flip(&mut self, site: usize, de: f64) {
        self.magnetization -= 2 * self.spins[site] as i64;
        self.spins[site] = -self.spins[site];
        self.energy += de;
    }
}

/// One proposal at a uniformly random site. Returns true if accepted.
pub fn mcmc_step(state: &mut ChainState, h0: &DiagonalHamiltonian, beta: f64, rule: UpdateRule, r: &mut Rng) -> bool {
    let site = r.random_range(0..h0.n());
    let de = state.flip_delta(h0, site);
    let p = acceptance_probability(rule, beta, de);
    if p >= 1.0 || r.random::<f64>() < p {
        state.flip(site, de);
        true
    } else {
        false
    }
}

/// Single-step transition probability between configurations differing in
/// one site (zero otherwise; the holding probability is not returned).
pub fn transition_probability(h0: &DiagonalHamiltonian, beta: f64, rule: UpdateRule, from: &[i8], to: &[i8]) -> f64 {
    let diff: Vec<usize> = (0..from.len()).filter(|&i| from[i] != to[i]).collect();
    if diff.len() != 1 {
        return 0.0;
    }
    let de = h0.energy(to) - h0.energy(from);
    acceptance_probability(rule, beta, de) / h0.n() as f64
}

/// Named configuration regions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionPredicate {
    /// `|m| <= max_abs`.
    MagBand { max_abs: f64 },
    /// `m > min`.
    MagAbove { min: f64 },
    /// `m < max`.
    MagBelow { max: f64 },
    /// No fault line with at most `k_max` defects (square lattice).
    FaultLineFree { k_max: usize },
    /// Has a fault line with at most `k_max` defects (square lattice).
    FaultLineWithin { k_max: usize },
    /// Hamming distance to `center` at most `radius`.
    HammingBall { center: Vec<i8>, radius: usize },
}

impl RegionPredicate {
    pub fn name(&self) -> &'static str {
        match self {
            RegionPredicate::MagBand { .. } => "mag_band",
            RegionPredicate::MagAbove { .. } => "mag_above",
            RegionPredicate::MagBelow { .. } => "mag_below",
            RegionPredicate::FaultLineFree { .. } => "fault_line_free",
            RegionPredicate::FaultLineWithin { .. } => "fault_line_within",
            RegionPredicate::HammingBall { .. } => "hamming_ball",
        }
    }

    /// Some(f) if membership depends only on the magnetization.
    fn on_magnetization(&self) -> Option<Box<dyn Fn(i64) -> bool + Sync + '_>> {
        match self {
            RegionPredicate::MagBand { max_abs } => Some(Box::new(move |m| (m.abs() as f64) <= *max_abs)),
            RegionPredicate::MagAbove { min } => Some(Box::new(move |m| m as f64 > *min)),
            RegionPredicate::MagBelow { max } => Some(Box::new(move |m| (m as f64) < *max)),
            _ => None,
        }
    }

    pub fn eval(&self, spins: &[i8]) -> Result<bool> {
        if let Some(f) = self.on_magnetization() {
            return Ok(f(spins.iter().map(|&s| s as i64).sum()));
        }
        match self {
            RegionPredicate::FaultLineFree { k_max } | RegionPredicate::FaultLineWithin { k_max } => {
                let l = (spins.len() as f64).sqrt().round() as usize;
                let sigma = SpinConfiguration::new(l, spins.to_vec())?;
                let has = min_defect_fault_line(&sigma, *k_max).is_some();
                Ok(matches!(self, RegionPredicate::FaultLineWithin { .. }) == has)
            }
            RegionPredicate::HammingBall { center, radius } => {
                if center.len() != spins.len() {
                    return Err(Error::DimensionMismatch {
                        expected: center.len(),
                        got: spins.len(),
                    });
                }
                Ok(center.iter().zip(spins).filter(|(a, b)| a != b).count() <= *radius)
            }
            _ => unreachable!(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MeasureMode {
    /// Magnetization collapse when possible, otherwise full enumeration of
    /// up to `budget` configurations.
    Exact { budget: u64 },
    /// Independent chains; the standard error is taken across chains.
    Mcmc {
        rule: UpdateRule,
        chains: usize,
        burn_in: u64,
        steps: u64,
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureMethod {
    Collapsed,
    Enumerated,
    Mcmc,
}

#[derive(Clone, Debug, Serialize)]
pub struct Measure {
    pub value: f64,
    pub log_value: f64,
    pub stderr: f64,
    pub method: MeasureMethod,
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

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `ln pi_beta(region)` for the Curie-Weiss model via the `n + 1` magnetization levels.
pub fn curie_weiss_log_measure(n: usize, beta: f64, member: &dyn Fn(i64) -> bool) -> f64 {
    let mut num = f64::NEG_INFINITY;
    let mut den = f64::NEG_INFINITY;
    for down in 0..=n {
        let m = n as i64 - 2 * down as i64;
        let energy = -((m * m) as f64) / n as f64;
        let lw = ln_binomial(n, down) - beta * energy;
        den = log_add(den, lw);
        if member(m) {
            num = log_add(num, lw);
        }
    }
    num - den
}

/// Band half-width `eps n`, widened to 1 for odd `n` so the band is never empty.
pub fn band_cut(n: usize, eps: f64) -> f64 {
    (eps * n as f64).max((n % 2) as f64)
}

/// `ln[pi(A) pi(C) / pi(B)]` for Curie-Weiss with `A = {m > w}`,
/// `C = {m < -w}`, `B = {|m| <= w}` and `w = band_cut(n, eps)`.
pub fn curie_weiss_log_barrier(n: usize, beta: f64, eps: f64) -> f64 {
    let cut = band_cut(n, eps);
    let a = curie_weiss_log_measure(n, beta, &|m| m as f64 > cut);
    let c = curie_weiss_log_measure(n, beta, &|m| (m as f64) < -cut);
    let b = curie_weiss_log_measure(n, beta, &|m| (m.abs() as f64) <= cut);
    a + c - b
}

/// Gibbs measure `pi_beta(region)`.
pub fn region_measure(h0: &DiagonalHamiltonian, beta: f64, region: &RegionPredicate, mode: MeasureMode) -> Result<Measure> {
    let n = h0.n();
    match mode {
        MeasureMode::Exact { budget } => {
            if let (Family::CurieWeiss { .. }, Some(f)) = (h0.family(), region.on_magnetization()) {
                let lv = curie_weiss_log_measure(n, beta, &f);
                return Ok(Measure {
                    value: lv.exp(),
                    log_value: lv,
                    stderr: 0.0,
                    method: MeasureMethod::Collapsed,
                });
            }
            if n >= 63 || (1u64 << n) > budget {
                return Err(Error::Budget(format!(
                    "exact region measure needs 2^{n} configurations, budget is {budget}"
                )));
            }
            let total = 1usize << n;
            let chunk = 1usize << 12;
            let parts = (0..total.div_ceil(chunk))
                .into_par_iter()
                .map(|c| -> Result<(f64, f64)> {
                    let (mut num, mut den) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                    for x in c * chunk..((c + 1) * chunk).min(total) {
                        let s = spins_of(x, n);
                        let lw = -beta * h0.energy(&s);
                        den = log_add(den, lw);
                        if region.eval(&s)? {
                            num = log_add(num, lw);
                        }
                    }
                    Ok((num, den))
                })
                .collect::<Result<Vec<_>>>()?;
            let (num, den) = parts
                .into_iter()
                .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |a, b| (log_add(a.0, b.0), log_add(a.1, b.1)));
            let lv = num - den;
            Ok(Measure {
                value: lv.exp(),
                log_value: lv,
                stderr: 0.0,
                method: MeasureMethod::Enumerated,
            })
        }
        MeasureMode::Mcmc {
            rule,
            chains,
            burn_in,
            steps,
            seed,
        } => {
            if chains < 2 || steps == 0 {
                return invalid("sampled region measure needs at least 2 chains and 1 step");
            }
            let fractions = (0..chains)
                .into_par_iter()
                .map(|c| -> Result<f64> {
                    let mut r = rng::substream(seed, c as u64);
                    let mut st = ChainState::random(h0, &mut r);
                    for _ in 0..burn_in {
                        mcmc_step(&mut st, h0, beta, rule, &mut r);
                    }
                    let mut hits = 0u64;
                    let mag_only = region.on_magnetization();
                    for _ in 0..steps {
                        mcmc_step(&mut st, h0, beta, rule, &mut r);
                        let inside = match &mag_only {
                            Some(f) => f(st.magnetization()),
                            None => region.eval(st.spins())?,
                        };
                        hits += inside as u64;
                    }
                    Ok(hits as f64 / steps as f64)
                })
                .collect::<Result<Vec<_>>>()?;
            let k = fractions.len() as f64;
            let mean = fractions.iter().sum::<f64>() / k;
            let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (k - 1.0);
            Ok(Measure {
                value: mean,
                log_value: mean.ln(),
                stderr: (var / k).sqrt(),
                method: MeasureMethod::Mcmc,
            })
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub step: u64,
    pub energy: f64,
    pub magnetization: i64,
    pub region: String,
}

/// Runs one chain and records every `thin`-th state. `labels` are tried in
/// order; the first matching name is recorded ("none" otherwise).
pub fn run_trace(
    h0: &DiagonalHamiltonian,
    beta: f64,
    rule: UpdateRule,
    steps: u64,
    thin: u64,
    seed: u64,
    labels: &[(String, RegionPredicate)],
) -> Result<Vec<TraceRow>> {
    if thin == 0 {
        return invalid("thinning must be >= 1");
    }
    let mut r = rng::seeded(seed);
    let mut st = ChainState::random(h0, &mut r);
    let mut rows = Vec::new();
    for step in 0..=steps {
        if step > 0 {
            mcmc_step(&mut st, h0, beta, rule, &mut r);
        }
        if step % thin == 0 {
            let mut region = "none".to_string();
            for (name, p) in labels {
                if p.eval(st.spins())? {
                    region = name.clone();
                    break;
                }
            }
            rows.push(TraceRow {
                step,
                energy: st.energy(),
                magnetization: st.magnetization(),
                region,
            });
        }
    }
    Ok(rows)
}

/// Least-squares line `y = slope x + intercept` and its `R^2`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}
