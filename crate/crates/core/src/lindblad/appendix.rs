//! Norm bounds between nearby generators, truncation tails of the
//! Gaussian-filtered construction, and light-cone truncation errors.

use super::LindbladianSpec;
use crate::error::{invalid, Error, Result};
use crate::operator::{
    check_operator_cap, eig_hermitian, op_norm, random_pure_state, trace_norm, unitary_evolution, CMat,
    DenseOperator, EigenSystem, Pauli, C64,
};
use crate::rng::Rng;
use std::collections::VecDeque;

// ---------------------------------------------------------------------------
// Generator distance
// ---------------------------------------------------------------------------

/// `2 ||G - G'|| + 5 sum_k (||L_k|| + ||L'_k||) ||L_k - L'_k||`.
pub fn diamond_upper_bound(a: &LindbladianSpec, b: &LindbladianSpec) -> Result<f64> {
    if a.jumps().len() != b.jumps().len() {
        return invalid(format!(
            "generators have {} and {} jump operators",
            a.jumps().len(),
            b.jumps().len()
        ));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let mut total = 2.0 * op_norm(&(a.coherent().mat() - b.coherent().mat()));
    for (l, m) in a.jumps().iter().zip(b.jumps()) {
        let diff = op_norm(&(l.mat() - m.mat()));
        if diff > 0.0 {
            total += 5.0 * (op_norm(l.mat()) + op_norm(m.mat())) * diff;
        }
    }
    Ok(total)
}

/// Largest `||((L - L') (x) id)(psi)||_1` over `samples` random pure states on
/// the system plus `ancilla` reference qubits. A lower estimate of the
/// induced trace-norm distance.
pub fn sampled_channel_distance(
    a: &LindbladianSpec,
    b: &LindbladianSpec,
    ancilla: usize,
    samples: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let n = a.n_qubits() + ancilla;
    check_operator_cap(n)?;
    let (la, lb) = if ancilla > 0 {
        (a.lift_to_ancilla(ancilla)?, b.lift_to_ancilla(ancilla)?)
    } else {
        (a.clone(), b.clone())
    };
    let mut best = 0.0f64;
    for _ in 0..samples {
        let psi = random_pure_state(n, rng)?;
        let d = la.apply(psi.mat()) - lb.apply(psi.mat());
        best = best.max(trace_norm(&d));
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Truncation tails
// ---------------------------------------------------------------------------

/// Norm bounds on what is discarded when the time integrals are cut off.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChenTails {
    /// `int_{|t| > R beta} |l(omega, t)| dt`.
    pub tail_l: f64,
    /// `int int_{|t| > R or |t'| > R} |b1(t)| |b2(t')| dt dt'`.
    pub tail_b: f64,
}

const GL_ORDER: usize = 16;

fn gauss_legendre() -> &'static [(f64, f64)] {
    use std::sync::OnceLock;
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = GL_ORDER;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        out
    })
}

fn gl_panels(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for &(x, w) in gauss_legendre() {
            s += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * s
}

/// Composite Gauss-Legendre on `[a, b]`, doubling panels until two
/// successive values agree to `rtol`.
fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rtol: f64) -> Result<f64> {
    let mut panels = 4;
    let mut prev = gl_panels(f, a, b, panels);
    while panels < 1 << 14 {
        panels *= 2;
        let cur = gl_panels(f, a, b, panels);
        if (cur - prev).abs() <= rtol * cur.abs() || (cur - prev).abs() < 1e-300 {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::NoConvergence(format!("quadrature on [{a}, {b}] did not converge")))
}

/// `b1(t) = int sin(s - t) exp(-2 (s - t)^2) / cosh(2 pi s) ds`.
fn b1(t: f64) -> f64 {
    let f = |s: f64| {
        let u = s - t;
        u.sin() * (-2.0 * u * u).exp() / (2.0 * std::f64::consts::PI * s).cosh()
    };
    // The Gaussian factor is below 1e-55 outside |s - t| < 8.
    gl_panels(&f, t - 8.0, t + 8.0, 64)
}

/// Tails of the filter `l(omega, t)` beyond `|t| = R beta` and of the
/// coherent kernel `b1(t) b2(t')` outside `|t|, |t'| <= R`.
pub fn chen_truncation_error(beta: f64, r: f64, omega: f64) -> Result<ChenTails> {
    if !(beta > 0.0) || !(r > 0.0) {
        return invalid("truncation tails need beta > 0 and R > 0");
    }
    let pi = std::f64::consts::PI;
    let rtol = 1e-11;

    let c_l = (beta * (pi / 2.0).sqrt()).powf(-0.5) * (-(beta * omega + 1.0).powi(2) / 2.0).exp();
    let g = |t: f64| (-(t * t) / (beta * beta)).exp();
    // e^{-t^2/beta^2} has dropped by e^{-700} beyond R beta + 27 beta.
    let tail_l = 2.0 * c_l * integrate(&g, r * beta, r * beta + 27.0 * beta, rtol)?;

    let c_b = (0.125f64).exp() / pi;
    let b2 = |t: f64| c_b * (-4.0 * t * t).exp();
    let abs_b1 = |t: f64| b1(t).abs();
    // |b1| decays like e^{-2 pi |t|}; 20 units past R is below e^{-125}.
    let t1 = 2.0 * integrate(&abs_b1, r, r + 20.0, 1e-9)?;
    let i1_inner = 2.0 * integrate(&abs_b1, 0.0, r, 1e-9)?;
    let i2_full = 2.0 * integrate(&b2, 0.0, 14.0, rtol)?;
    let t2 = 2.0 * integrate(&b2, r, r + 14.0, rtol)?;
    Ok(ChenTails {
        tail_l,
        tail_b: t1 * i2_full + i1_inner * t2,
    })
}

// ---------------------------------------------------------------------------
// Light cones
// ---------------------------------------------------------------------------

/// A term acting on `sites` (first site is the most significant local bit).
#[derive(Clone, Debug)]
pub struct LocalTerm {
    pub sites: Vec<usize>,
    pub op: CMat,
}

#[derive(Clone, Debug)]
pub struct LocalHamiltonian {
    pub n: usize,
    pub terms: Vec<LocalTerm>,
}

/// Site distances used to grow a ball around a region.
#[derive(Clone, Debug)]
pub enum Geometry {
    /// Open chain of `n` sites.
    Chain { n: usize },
    /// `l x l` open square lattice, row-major.
    Square { l: usize },
    /// Graph distance through shared Hamiltonian terms.
    Interaction,
}

impl LocalHamiltonian {
    pub fn new(n: usize, terms: Vec<LocalTerm>) -> Result<Self> {
        for t in &terms {
            if t.sites.iter().any(|&s| s >= n) {
                return invalid(format!("term on sites {:?} outside {n} qubits", t.sites));
            }
            let d = 1usize << t.sites.len();
            if t.op.nrows() != d || t.op.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: t.op.nrows(),
                });
            }
        }
        Ok(LocalHamiltonian { n, terms })
    }

    /// `-J sum Z_i Z_{i+1} - h sum X_i` on an open chain.
    pub fn tfim_chain(n: usize, coupling: f64, field: f64) -> Result<Self> {
        let zz = crate::operator::kron(&Pauli::Z.matrix(), &Pauli::Z.matrix()) * C64::new(-coupling, 0.0);
        let x = Pauli::X.matrix() * C64::new(-field, 0.0);
        let mut terms = Vec::new();
        for i in 0..n.saturating_sub(1) {
            terms.push(LocalTerm {
                sites: vec![i, i + 1],
                op: zz.clone(),
            });
        }
        for i in 0..n {
            terms.push(LocalTerm {
                sites: vec![i],
                op: x.clone(),
            });
        }
        Self::new(n, terms)
    }

    pub fn to_dense(&self) -> Result<DenseOperator> {
        check_operator_cap(self.n)?;
        let d = 1usize << self.n;
        let mut h = CMat::zeros(d, d);
        for t in &self.terms {
            h += embed(&t.op, &t.sites, self.n);
        }
        DenseOperator::new(self.n, h)
    }

    /// Terms supported inside `ball` (sorted), re-indexed to positions in `ball`.
    pub fn restricted(&self, ball: &[usize]) -> LocalHamiltonian {
        let pos = |s: usize| ball.binary_search(&s).ok();
        let terms = self
            .terms
            .iter()
            .filter_map(|t| {
                let sites: Option<Vec<usize>> = t.sites.iter().map(|&s| pos(s)).collect();
                sites.map(|sites| LocalTerm { sites, op: t.op.clone() })
            })
            .collect();
        LocalHamiltonian { n: ball.len(), terms }
    }
}

impl Geometry {
    /// Distances from every site to the nearest site of `region`.
    pub fn distances(&self, h: &LocalHamiltonian, region: &[usize]) -> Result<Vec<usize>> {
        let n = h.n;
        if region.is_empty() || region.iter().any(|&s| s >= n) {
            return invalid(format!("region {region:?} is not inside the {n}-site lattice"));
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        match self {
            Geometry::Chain { n: m } => {
                if *m != n {
                    return Err(Error::DimensionMismatch { expected: *m, got: n });
                }
                for i in 0..n.saturating_sub(1) {
                    adj[i].push(i + 1);
                    adj[i + 1].push(i);
                }
            }
            Geometry::Square { l } => {
                if l * l != n {
                    return Err(Error::DimensionMismatch { expected: l * l, got: n });
                }
                for r in 0..*l {
                    for c in 0..*l {
                        let i = r * l + c;
                        if c + 1 < *l {
                            adj[i].push(i + 1);
                            adj[i + 1].push(i);
                        }
                        if r + 1 < *l {
                            adj[i].push(i + l);
                            adj[i + l].push(i);
                        }
                    }
                }
            }
            Geometry::Interaction => {
                for t in &h.terms {
                    for &a in &t.sites {
                        for &b in &t.sites {
                            if a != b {
                                adj[a].push(b);
                            }
                        }
                    }
                }
            }
        }
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for &s in region {
            dist[s] = 0;
            queue.push_back(s);
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }
}

/// Places a local operator on `sites` of an `n`-qubit register.
pub fn embed(op: &CMat, sites: &[usize], n: usize) -> CMat {
    let d = 1usize << n;
    let k = sites.len();
    let rest: Vec<usize> = (0..n).filter(|q| !sites.contains(q)).collect();
    let spread = |local: usize, qs: &[usize]| -> usize {
        let m = qs.len();
        let mut idx = 0;
        for (p, &q) in qs.iter().enumerate() {
            if (local >> (m - 1 - p)) & 1 == 1 {
                idx |= 1 << (n - 1 - q);
            }
        }
        idx
    };
    let mut out = CMat::zeros(d, d);
    let dl = 1usize << k;
    let nz: Vec<(usize, usize, C64)> = (0..dl)
        .flat_map(|i| (0..dl).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let v = op[(i, j)];
            (v != C64::new(0.0, 0.0)).then(|| (spread(i, sites), spread(j, sites), v))
        })
        .collect();
    for e in 0..1usize << rest.len() {
        let base = spread(e, &rest);
        for &(i, j, v) in &nz {
            out[(base | i, base | j)] += v;
        }
    }
    out
}

/// Operator norm of a large matrix via Lanczos on `D^dagger D`.
fn lanczos_norm(dmat: &CMat) -> f64 {
    let d = dmat.nrows();
    if d <= 64 {
        return op_norm(dmat);
    }
    let apply = |x: &nalgebra::DVector<C64>| dmat.adjoint() * (dmat * x);
    let mut basis: Vec<nalgebra::DVector<C64>> = Vec::new();
    let mut v = nalgebra::DVector::from_fn(d, |i, _| C64::new(1.0 + (i % 7) as f64 * 0.13, (i % 5) as f64 * 0.07));
    v /= C64::new(v.norm(), 0.0);
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    for it in 0..120.min(d) {
        basis.push(v.clone());
        let mut w = apply(&v);
        for q in &basis {
            let c = q.dotc(&w);
            w -= q * c;
        }
        for q in &basis {
            let c = q.dotc(&w);
            w -= q * c;
        }
        alphas.push(basis[it].dotc(&apply(&basis[it])).re);
        let b = w.norm();
        let m = alphas.len();
        let mut t = nalgebra::DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let top = t.symmetric_eigen().eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        if b < 1e-14 * top.max(1e-300) || (top - last).abs() <= 1e-13 * top {
            return top.max(0.0).sqrt();
        }
        last = top;
        betas.push(b);
        v = w / C64::new(b, 0.0);
    }
    last.max(0.0).sqrt()
}

/// Caches the full Heisenberg evolution `A(t)` so the truncation error can be
/// evaluated for many ball radii.
pub struct LightconeProbe {
    h: LocalHamiltonian,
    geometry: Geometry,
    region: Vec<usize>,
    a_local: CMat,
    t: f64,
    full: CMat,
    dist: Vec<usize>,
}

impl LightconeProbe {
    /// `a_local` acts on `region` (first site most significant).
    pub fn new(h: &LocalHamiltonian, a_local: &CMat, region: &[usize], t: f64, geometry: Geometry) -> Result<Self> {
        let dist = geometry.distances(h, region)?;
        if a_local.nrows() != 1 << region.len() {
            return Err(Error::DimensionMismatch {
                expected: 1 << region.len(),
                got: a_local.nrows(),
            });
        }
        let es = eig_hermitian(&h.to_dense()?)?;
        let a = embed(a_local, region, h.n);
        let full = heisenberg(&es, &a, t);
        Ok(LightconeProbe {
            h: h.clone(),
            geometry,
            region: region.to_vec(),
            a_local: a_local.clone(),
            t,
            full,
            dist,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Sites within distance `ell` of the region.
    pub fn ball(&self, ell: usize) -> Vec<usize> {
        (0..self.h.n).filter(|&i| self.dist[i] <= ell).collect()
    }

    /// `|| A(t) - A_ball(t) ||` where the ball evolution keeps only terms inside the ball.
    pub fn error(&self, ell: usize) -> Result<f64> {
        if self.t == 0.0 {
            return Ok(0.0);
        }
        let ball = self.ball(ell);
        let hb = self.h.restricted(&ball);
        let region_pos: Vec<usize> = self
            .region
            .iter()
            .map(|s| ball.binary_search(s).expect("region lies inside its ball"))
            .collect();
        let a_ball = embed(&self.a_local, &region_pos, ball.len());
        let es = eig_hermitian(&hb.to_dense()?)?;
        let evolved = heisenberg(&es, &a_ball, self.t);
        let back = embed(&evolved, &ball, self.h.n);
        Ok(lanczos_norm(&(&self.full - back)))
    }
}

/// `e^{iHt} A e^{-iHt}`.
fn heisenberg(es: &EigenSystem, a: &CMat, t: f64) -> CMat {
    let u = unitary_evolution(es, t);
    u.adjoint() * a * u
}

/// One-shot version of [`LightconeProbe::error`].
pub fn lieb_robinson_error(
    h: &LocalHamiltonian,
    a_local: &CMat,
    region: &[usize],
    t: f64,
    ell: usize,
    geometry: Geometry,
) -> Result<f64> {
    LightconeProbe::new(h, a_local, region, t, geometry)?.error(ell)
}
