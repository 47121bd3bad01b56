//! Mixing times of generators and discrete channels.
//!
//! The sweep method evolves a family of traceless differences `rho - sigma`
//! block by block and bisects on the first time the trace-norm ratio drops
//! below `eps`. Trace-norm contraction makes that ratio nonincreasing, so the
//! first crossing is well defined; the maximum over the family is a certified
//! lower bound on the true mixing time.

use super::superop::{generator_superop, kraus_superop, superop_blocks, SuperBlock};
use super::{KrausChannel, LindbladianSpec};
use crate::error::{invalid, Error, Result};
use crate::operator::{max_abs, trace_norm, vec_of, CMat, C64};
use nalgebra::{DVector, Schur};
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixingMethod {
    SuperopGap,
    WorstPairSweep,
}

#[derive(Clone, Debug)]
pub struct MixingEstimate {
    /// Time (generators) or step count (channels).
    pub time: f64,
    pub method: MixingMethod,
    /// Spectral gap of the generator, or `1 - |lambda_2|` for a channel.
    pub gap: Option<f64>,
    /// Set when the estimate comes from the spectrum of a non-normal map.
    pub heuristic: bool,
    pub worst_pair: Option<String>,
    pub pairs_checked: usize,
}

#[derive(Clone, Debug)]
pub struct StatePair {
    pub label: String,
    pub rho: CMat,
    pub sigma: CMat,
}

impl StatePair {
    pub fn new(label: impl Into<String>, rho: CMat, sigma: CMat) -> Self {
        StatePair {
            label: label.into(),
            rho,
            sigma,
        }
    }
}

/// Differences between pairs of basis states and between `(|i> +- |j>)/sqrt 2`
/// and `(|i> +- i|j>)/sqrt 2`. Small dimensions use all index pairs; larger
/// ones use pairs anchored at the first two and the last basis state.
pub fn default_pairs(d: usize) -> Vec<StatePair> {
    let mut idx_pairs = Vec::new();
    if d <= 16 {
        for i in 0..d {
            for j in i + 1..d {
                idx_pairs.push((i, j));
            }
        }
    } else {
        for &a in &[0, 1, d - 1] {
            for j in 0..d {
                if j != a && !idx_pairs.contains(&(j.min(a), j.max(a))) {
                    idx_pairs.push((a.min(j), a.max(j)));
                }
            }
        }
    }
    let mut out = Vec::new();
    for (i, j) in idx_pairs {
        let mut p = CMat::zeros(d, d);
        p[(i, i)] = C64::new(1.0, 0.0);
        let mut q = CMat::zeros(d, d);
        q[(j, j)] = C64::new(1.0, 0.0);
        out.push(StatePair::new(format!("basis {i} vs {j}"), p, q));
        for (tag, ph) in [("x", C64::new(1.0, 0.0)), ("y", C64::new(0.0, 1.0))] {
            let mut plus = CMat::zeros(d, d);
            let mut minus = CMat::zeros(d, d);
            for (m, s) in [(&mut plus, 1.0), (&mut minus, -1.0)] {
                m[(i, i)] = C64::new(0.5, 0.0);
                m[(j, j)] = C64::new(0.5, 0.0);
                m[(i, j)] = ph.conj() * 0.5 * s;
                m[(j, i)] = ph * 0.5 * s;
            }
            out.push(StatePair::new(format!("coherence-{tag} {i},{j}"), plus, minus));
        }
    }
    out
}

pub fn mixing_time(spec: &LindbladianSpec, eps: f64, method: MixingMethod) -> Result<MixingEstimate> {
    mixing_time_with_pairs(spec, eps, method, &default_pairs(spec.dim()))
}

pub fn mixing_time_with_pairs(
    spec: &LindbladianSpec,
    eps: f64,
    method: MixingMethod,
    pairs: &[StatePair],
) -> Result<MixingEstimate> {
    check_eps(eps)?;
    let s = generator_superop(spec)?;
    let blocks = superop_blocks(&s);
    match method {
        MixingMethod::SuperopGap => match generator_gap(&blocks) {
            Some((gap, non_normal)) => Ok(MixingEstimate {
                time: (1.0 / eps).ln() / gap,
                method,
                gap: Some(gap),
                heuristic: non_normal,
                worst_pair: None,
                pairs_checked: 0,
            }),
            None => sweep_continuous(&blocks, spec.dim(), eps, pairs),
        },
        MixingMethod::WorstPairSweep => sweep_continuous(&blocks, spec.dim(), eps, pairs),
    }
}

/// Mixing time of a discrete channel in steps (sweep method).
pub fn channel_mixing_time(ch: &KrausChannel, eps: f64, pairs: &[StatePair]) -> Result<MixingEstimate> {
    check_eps(eps)?;
    let s = kraus_superop(ch)?;
    let blocks = superop_blocks(&s);
    let d = 1usize << ch.n_qubits();
    let powers: Vec<BlockPowers> = blocks.iter().map(|b| BlockPowers::new(b.mat.clone())).collect();
    let (steps, label, count) = sweep(&blocks, powers, d, eps, pairs)?;
    Ok(MixingEstimate {
        time: steps as f64,
        method: MixingMethod::WorstPairSweep,
        gap: None,
        heuristic: false,
        worst_pair: label,
        pairs_checked: count,
    })
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.5) {
        return invalid(format!("eps must lie in (0, 1/2], got {eps}"));
    }
    Ok(())
}

/// Returns `(gap, non_normal)`; `None` if the Schur form yields no eigenvalues.
fn generator_gap(blocks: &[SuperBlock]) -> Option<(f64, bool)> {
    let mut eigs: Vec<C64> = Vec::new();
    let mut non_normal = false;
    for b in blocks {
        let m = &b.mat;
        if m.nrows() == 1 {
            eigs.push(m[(0, 0)]);
            continue;
        }
        let comm = m * m.adjoint() - m.adjoint() * m;
        let scale = max_abs(m).powi(2).max(1e-300);
        if max_abs(&comm) > 1e-9 * scale {
            non_normal = true;
        }
        let ev = Schur::new(m.clone()).eigenvalues()?;
        eigs.extend(ev.iter().copied());
    }
    let top = eigs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
        .map(|(k, _)| k)?;
    let gap = eigs
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != top)
        .map(|(_, z)| -z.re)
        .fold(f64::INFINITY, f64::min);
    Some((gap, non_normal))
}

struct BlockPowers {
    /// `powers[k] = P^(2^k)`.
    powers: Vec<CMat>,
}

impl BlockPowers {
    fn new(p: CMat) -> Self {
        BlockPowers { powers: vec![p] }
    }

    fn ensure(&mut self, k: usize) {
        while self.powers.len() <= k {
            let last = self.powers.last().unwrap();
            let sq = last * last;
            self.powers.push(sq);
        }
    }

    fn apply(&self, m: u64, x: &DVector<C64>) -> DVector<C64> {
        let mut y = x.clone();
        let mut k = 0;
        let mut mm = m;
        while mm > 0 {
            if mm & 1 == 1 {
                y = &self.powers[k] * y;
            }
            mm >>= 1;
            k += 1;
        }
        y
    }
}

fn sweep_continuous(blocks: &[SuperBlock], d: usize, eps: f64, pairs: &[StatePair]) -> Result<MixingEstimate> {
    let norm = blocks
        .iter()
        .map(|b| b.mat.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max))
        .fold(1e-12, f64::max);
    let tau0 = 0.5 / norm;
    let exp_blocks = |tau: f64| -> Vec<BlockPowers> {
        blocks
            .par_iter()
            .map(|b| BlockPowers::new((&b.mat * C64::new(tau, 0.0)).exp()))
            .collect()
    };
    let (coarse, _, _) = sweep(blocks, exp_blocks(tau0), d, eps, pairs)?;
    let tau = if coarse < 1024 {
        tau0 * coarse as f64 / 1024.0
    } else {
        tau0
    };
    let (steps, label, count) = sweep(blocks, exp_blocks(tau), d, eps, pairs)?;
    Ok(MixingEstimate {
        time: steps as f64 * tau,
        method: MixingMethod::WorstPairSweep,
        gap: generator_gap(blocks).map(|g| g.0),
        heuristic: false,
        worst_pair: label,
        pairs_checked: count,
    })
}

/// First step count `m` with `||P^m (rho - sigma)||_1 <= eps ||rho - sigma||_1`,
/// maximized over pairs. Returns `(m, worst label, pairs evaluated)`.
fn sweep(
    blocks: &[SuperBlock],
    mut powers: Vec<BlockPowers>,
    d: usize,
    eps: f64,
    pairs: &[StatePair],
) -> Result<(u64, Option<String>, usize)> {
    const MAX_DOUBLINGS: usize = 52;
    let mut worst: (u64, Option<String>) = (0, None);
    let mut count = 0;
    for pair in pairs {
        let diff = &pair.rho - &pair.sigma;
        if diff.nrows() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: diff.nrows(),
            });
        }
        let norm0 = trace_norm(&diff);
        if norm0 <= 1e-14 {
            continue;
        }
        count += 1;
        let v = vec_of(&diff);
        let parts: Vec<(usize, DVector<C64>)> = blocks
            .iter()
            .enumerate()
            .filter_map(|(b, blk)| {
                let x = DVector::from_iterator(blk.indices.len(), blk.indices.iter().map(|&i| v[i]));
                (x.iter().any(|z| z.norm() > 0.0)).then_some((b, x))
            })
            .collect();
        let ratio = |powers: &Vec<BlockPowers>, m: u64| -> f64 {
            let mut out = vec![C64::new(0.0, 0.0); d * d];
            for (b, x) in &parts {
                let y = powers[*b].apply(m, x);
                for (k, &i) in blocks[*b].indices.iter().enumerate() {
                    out[i] = y[k];
                }
            }
            trace_norm(&CMat::from_column_slice(d, d, &out)) / norm0
        };
        // doubling
        let mut k = 0usize;
        loop {
            for (b, _) in &parts {
                powers[*b].ensure(k);
            }
            if ratio(&powers, 1u64 << k) <= eps {
                break;
            }
            k += 1;
            if k > MAX_DOUBLINGS {
                return Err(Error::NoConvergence(format!(
                    "pair '{}' did not mix within 2^{MAX_DOUBLINGS} steps",
                    pair.label
                )));
            }
        }
        let (mut lo, mut hi) = if k == 0 { (0u64, 1u64) } else { (1u64 << (k - 1), 1u64 << k) };
        if k == 0 && ratio(&powers, 0) <= eps {
            hi = 0;
        }
        while hi > lo + 1 {
            let mid = lo + (hi - lo) / 2;
            if ratio(&powers, mid) <= eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if hi > worst.0 || worst.1.is_none() {
            worst = (hi, Some(pair.label.clone()));
        }
    }
    Ok((worst.0, worst.1, count))
}
