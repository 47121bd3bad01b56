//! Vectorized superoperators (column stacking) and their decomposition into
//! invariant blocks.

use super::{KrausChannel, LindbladianSpec};
use crate::error::Result;
use crate::operator::{check_superop_cap, CMat, SparseOp, C64};

/// Small dense problems are accumulated densely, larger ones as triplets.
enum Acc {
    Dense(CMat),
    Sparse(Vec<(usize, usize, C64)>),
}

impl Acc {
    fn new(dim: usize) -> Acc {
        if dim <= 1024 {
            Acc::Dense(CMat::zeros(dim, dim))
        } else {
            Acc::Sparse(Vec::new())
        }
    }

    /// Adds `w * (a (x) b)` for sparse `a`, `b`.
    fn add_kron(&mut self, a: &SparseOp, b: &SparseOp, w: C64) {
        let d = b.dim;
        match self {
            Acc::Dense(m) => {
                for &(i, j, x) in &a.entries {
                    for &(k, l, y) in &b.entries {
                        m[(i * d + k, j * d + l)] += w * x * y;
                    }
                }
            }
            Acc::Sparse(t) => {
                for &(i, j, x) in &a.entries {
                    for &(k, l, y) in &b.entries {
                        t.push((i * d + k, j * d + l, w * x * y));
                    }
                }
                if t.len() > 4_000_000 {
                    let merged = SparseOp::from_entries(d * d, std::mem::take(t));
                    *t = merged.entries;
                }
            }
        }
    }

    fn finish(self, dim: usize) -> SparseOp {
        match self {
            Acc::Dense(m) => SparseOp::from_dense(&m, 0.0),
            Acc::Sparse(t) => SparseOp::from_entries(dim, t),
        }
    }
}

fn sparse(m: &CMat) -> SparseOp {
    let scale = crate::operator::max_abs(m).max(1e-300);
    SparseOp::from_dense(m, 1e-15 * scale)
}

fn sparse_identity(d: usize) -> SparseOp {
    SparseOp::from_entries(d, (0..d).map(|i| (i, i, C64::new(1.0, 0.0))).collect())
}

fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

/// Superoperator of a generator: `vec(L(rho)) = S vec(rho)`.
pub fn generator_superop(spec: &LindbladianSpec) -> Result<SparseOp> {
    check_superop_cap(spec.n_qubits())?;
    let d = spec.dim();
    let id = sparse_identity(d);
    let mut acc = Acc::new(d * d);
    let g = spec.coherent().mat();
    if g.iter().any(|z| z.norm() > 0.0) {
        acc.add_kron(&id, &sparse(g), C64::new(0.0, -1.0));
        acc.add_kron(&sparse(&g.transpose()), &id, C64::new(0.0, 1.0));
    }
    for l in spec.jumps() {
        let s = sparse(l.mat());
        let sc = SparseOp {
            dim: s.dim,
            entries: s.entries.iter().map(|&(i, j, v)| (i, j, v.conj())).collect(),
        };
        acc.add_kron(&sc, &s, C64::new(1.0, 0.0));
    }
    let k = spec.decay_operator();
    acc.add_kron(&id, &sparse(k), C64::new(-0.5, 0.0));
    acc.add_kron(&sparse(&k.transpose()), &id, C64::new(-0.5, 0.0));
    Ok(acc.finish(d * d))
}

/// Superoperator `sum_k conj(K) (x) K` of a channel.
pub fn kraus_superop(ch: &KrausChannel) -> Result<SparseOp> {
    check_superop_cap(ch.n_qubits())?;
    let d = 1usize << ch.n_qubits();
    let mut acc = Acc::new(d * d);
    for k in ch.kraus() {
        acc.add_kron(&sparse(&conj(k)), &sparse(k), C64::new(1.0, 0.0));
    }
    Ok(acc.finish(d * d))
}

/// An invariant coordinate block of a superoperator.
#[derive(Clone, Debug)]
pub struct SuperBlock {
    pub indices: Vec<usize>,
    pub mat: CMat,
}

/// Splits a superoperator into connected components of its sparsity graph.
pub fn superop_blocks(s: &SparseOp) -> Vec<SuperBlock> {
    let n = s.dim;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(i, j, _) in &s.entries {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut comp_of = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if comp_of[r] == usize::MAX {
            comp_of[r] = comps.len();
            comps.push(Vec::new());
        }
        let c = comp_of[r];
        comp_of[i] = c;
        comps[c].push(i);
    }
    let mut local = vec![0usize; n];
    for c in &comps {
        for (k, &i) in c.iter().enumerate() {
            local[i] = k;
        }
    }
    let mut blocks: Vec<SuperBlock> = comps
        .into_iter()
        .map(|idx| {
            let m = idx.len();
            SuperBlock {
                indices: idx,
                mat: CMat::zeros(m, m),
            }
        })
        .collect();
    for &(i, j, v) in &s.entries {
        let b = &mut blocks[comp_of[i]];
        b.mat[(local[i], local[j])] += v;
    }
    blocks
}
